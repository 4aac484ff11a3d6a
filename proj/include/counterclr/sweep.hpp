#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "counterclr/metrics.hpp"
#include "counterclr/simulator.hpp"
#include "counterclr/training.hpp"

namespace counterclr {

enum class Method { kCounterClr, kNaive, kIps, kSnips, kDr };

std::string to_string(Method m);
// Throws ArgumentError listing the valid names.
Method parse_method(const std::string& name);
const std::vector<std::string>& method_names();

struct SweepOptions {
  double slope = 2.0;
  double val_fraction = 0.1;
  std::size_t threads = 1;
  std::string dataset = "synthetic";
};

// One (method, ratio, seed) cell; `metrics` is empty when not applicable
// (no unobserved cells to test on).
struct SweepCell {
  Method method = Method::kCounterClr;
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::size_t n_observed = 0;
  std::size_t n_test = 0;
  std::optional<MetricReport> metrics;
};

// Calibrate exposure to `ratio`, sample observations with `seed`, split off
// validation, train with config.seed = seed, evaluate r1 on the unobserved
// cells.
SweepCell run_sweep_cell(const SyntheticGroundTruth& gt, double ratio,
                         Method method, std::uint64_t seed,
                         const TrainConfig& config, const SweepOptions& options);

// Cells in (ratio, method, seed) order regardless of thread count.
std::vector<SweepCell> sparsity_sweep(const SyntheticGroundTruth& gt,
                                      const std::vector<double>& ratios,
                                      const std::vector<Method>& methods,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainConfig& config,
                                      const SweepOptions& options = {});

std::string sweep_csv_header();
std::string sweep_csv_row(const SweepCell& cell, const std::string& dataset);

// Trains `method` on the split and returns a predictor's test predictions.
std::vector<double> train_and_predict(Method method, const DataSplit& data,
                                      const TrainConfig& config,
                                      const InteractionDataset& test);

}  // namespace counterclr
