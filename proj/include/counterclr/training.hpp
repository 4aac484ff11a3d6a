#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "counterclr/backbone.hpp"

namespace counterclr {

// kMse: plain validation MSE. kWeightedMse: self-normalized validation MSE
// with weights 1 / max(clip, o). kObjective: L_base + alpha * L_pro on the
// validation ratings plus as many fixed unobserved pairs.
enum class ModelSelection { kMse, kWeightedMse, kObjective };

std::string to_string(ModelSelection s);
ModelSelection parse_model_selection(const std::string& text);

// Hyper-parameters shared by CounterCLR and the baseline trainers.
struct TrainConfig {
  double alpha = 10.0;
  double beta = 0.1;
  double temperature = 0.07;
  double tau = 1.0;
  double momentum = 0.999;
  std::size_t K = 8;
  double learning_rate = 0.05;
  double weight_decay = 1e-6;
  std::size_t batch_size = 256;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;
  std::size_t contrastive_users_per_batch = 64;
  // 0 = rating vectors over every item; otherwise a uniform item sample.
  std::size_t contrastive_items = 0;
  double propensity_clip = 0.05;
  bool stop_gradient_propensity = true;
  // Epochs without validation improvement before stopping; 0 disables.
  std::size_t patience = 10;
  // CounterCLR model selection criterion.
  ModelSelection selection = ModelSelection::kObjective;
  EncoderConfig encoder;
  // Logistic propensity model epochs (IPS / SNIPS / DR baselines).
  std::size_t propensity_epochs = 10;
  bool record_step_losses = false;

  // Throws ArgumentError on out-of-range fields.
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double base = 0.0;
  double propensity = 0.0;
  double contrastive = 0.0;
  double total = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
  // Criterion used for model selection (equals val_mse unless weighted).
  double val_selection = 0.0;
};

struct TrainReport {
  std::string method;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_mse = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  double wall_seconds = 0.0;
  // Per-step total loss, only with TrainConfig::record_step_losses.
  std::vector<double> step_losses;
};

// Tracks the best validation MSE and decides when to stop.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}
  // Returns true when `val_mse` is a new best.
  bool update(double val_mse);
  bool should_stop() const { return patience_ > 0 && stale_ >= patience_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

}  // namespace counterclr
