#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "counterclr/caunet.hpp"
#include "counterclr/data.hpp"
#include "counterclr/objective.hpp"
#include "counterclr/training.hpp"

namespace counterclr {

struct TrainedCauNet {
  CauNet model;
  TrainReport report;
};

// Per step: observed minibatch, b exposed cells (train or validation) and b
// unexposed cells for L_pro, an independent uniform user sub-batch for L_con,
// one Adam step on the trainable blocks, then the W3 momentum update. The
// epoch with the lowest TrainConfig::selection value is returned.
TrainedCauNet train_counterclr(const DataSplit& data, const TrainConfig& config);

// MSE-only training of the CauNet exposure head with the same
// initialization and minibatch order as train_counterclr.
TrainedCauNet train_exposure_mse(const DataSplit& data, const TrainConfig& config);

// sum_v w_v (r1_v - r_v)^2 / sum_v w_v with w_v = 1 / max(clip, o_v).
double weighted_validation_mse(const CauNet& net, const InteractionDataset& validation);

LossSpec loss_spec_from(const TrainConfig& config, const RatingScale& scale);

// Hyper-parameter lattice: field name -> candidate values. Recognized names:
// alpha, beta, temperature, tau, momentum, K, learning_rate, weight_decay,
// batch_size, epochs, contrastive_users_per_batch, propensity_clip.
using ConfigGrid = std::map<std::string, std::vector<double>>;

std::vector<TrainConfig> expand_grid(const TrainConfig& base, const ConfigGrid& grid);
void set_config_field(TrainConfig& config, const std::string& name, double value);

struct GridPoint {
  TrainConfig config;
  double val_mse = 0.0;  // +inf when the run diverged
  bool diverged = false;
  std::string message;
};

struct GridResult {
  std::vector<GridPoint> points;  // in lattice order
  std::size_t best = 0;
};

using GridTrainer = std::function<double(const TrainConfig&)>;

// Evaluates every lattice point with `train_fn` (returning validation MSE;
// NumericalError marks divergence) using up to `threads` workers.
GridResult grid_search(const TrainConfig& base, const ConfigGrid& grid,
                       const GridTrainer& train_fn, std::size_t threads = 1);
// CounterCLR on `data`, ranked by the validation MSE of each run's kept epoch.
GridResult grid_search(const DataSplit& data, const TrainConfig& base,
                       const ConfigGrid& grid, std::size_t threads = 1);

std::string grid_csv_header();
std::string grid_csv_row(const GridPoint& point);

// Runs fn(0..n-1) on up to `threads` workers.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace counterclr
