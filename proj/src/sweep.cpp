#include "counterclr/sweep.hpp"

#include <sstream>

#include "counterclr/baselines.hpp"
#include "counterclr/error.hpp"
#include "counterclr/trainer.hpp"

namespace counterclr {

const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"counterclr", "naive", "ips", "snips", "dr"};
  return names;
}

std::string to_string(Method m) {
  return method_names()[static_cast<std::size_t>(m)];
}

Method parse_method(const std::string& name) {
  const auto& names = method_names();
  for (std::size_t k = 0; k < names.size(); ++k) {
    if (names[k] == name) return static_cast<Method>(k);
  }
  std::string valid;
  for (const auto& n : names) valid += (valid.empty() ? "" : ", ") + n;
  throw ArgumentError("unknown method '" + name + "' (valid: " + valid + ")");
}

std::vector<double> train_and_predict(Method method, const DataSplit& data,
                                      const TrainConfig& config,
                                      const InteractionDataset& test) {
  if (method == Method::kCounterClr) {
    const auto run = train_counterclr(data, config);
    return predict_observed(run.model, test);
  }
  const auto baseline = static_cast<BaselineMethod>(static_cast<int>(method) - 1);
  const auto run = train_baseline(baseline, data.train, data.validation, config);
  return predict_observed(run.model, test);
}

SweepCell run_sweep_cell(const SyntheticGroundTruth& gt, double ratio,
                         Method method, std::uint64_t seed,
                         const TrainConfig& config, const SweepOptions& options) {
  SweepCell cell{method, ratio, seed, 0, 0, std::nullopt};
  const auto policy = calibrate_policy(gt, options.slope, ratio);
  const auto sample = sample_observations(gt, policy, seed);
  cell.n_observed = sample.observed.size();
  cell.n_test = sample.unobserved.size();
  if (sample.unobserved.empty() || sample.observed.size() < 2) return cell;

  const auto data = split(sample.observed, options.val_fraction, seed);
  auto cfg = config;
  cfg.seed = seed;
  const auto predictions = train_and_predict(method, data, cfg, sample.unobserved);
  auto report = evaluate_predictions(predictions, sample.unobserved);
  report.metadata["method"] = to_string(method);
  report.metadata["dataset"] = options.dataset;
  report.metadata["seed"] = std::to_string(seed);
  report.metadata["observed_ratio"] = format_double(ratio);
  cell.metrics = std::move(report);
  return cell;
}

std::vector<SweepCell> sparsity_sweep(const SyntheticGroundTruth& gt,
                                      const std::vector<double>& ratios,
                                      const std::vector<Method>& methods,
                                      const std::vector<std::uint64_t>& seeds,
                                      const TrainConfig& config,
                                      const SweepOptions& options) {
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw ArgumentError("sweep ratios must lie in (0, 1]");
  }
  struct Job {
    double ratio;
    Method method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (double r : ratios) {
    for (auto m : methods) {
      for (auto s : seeds) jobs.push_back({r, m, s});
    }
  }
  std::vector<SweepCell> cells(jobs.size());
  parallel_for(jobs.size(), options.threads, [&](std::size_t k) {
    cells[k] = run_sweep_cell(gt, jobs[k].ratio, jobs[k].method, jobs[k].seed,
                              config, options);
  });
  return cells;
}

std::string sweep_csv_header() {
  return "method,dataset,observed_ratio,seed,n_observed,n_test,mse,mae,"
         "ndcg_at_5,n_users_ranked,status";
}

std::string sweep_csv_row(const SweepCell& cell, const std::string& dataset) {
  std::ostringstream os;
  os << to_string(cell.method) << ',' << dataset << ','
     << format_double(cell.ratio) << ',' << cell.seed << ',' << cell.n_observed
     << ',' << cell.n_test << ',';
  if (cell.metrics) {
    const auto& m = *cell.metrics;
    os << format_double(m.mse) << ',' << format_double(m.mae) << ','
       << format_double(m.ndcg_at_5) << ',' << m.n_users_ranked << ",ok";
  } else {
    os << "NA,NA,NA,0,not_applicable";
  }
  return os.str();
}

}  // namespace counterclr
