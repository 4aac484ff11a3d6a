#include "counterclr/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "counterclr/adam.hpp"
#include "counterclr/error.hpp"
#include "counterclr/metrics.hpp"
#include "counterclr/rng.hpp"

namespace counterclr {

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ArgumentError(std::string("invalid config: ") + what);
  };
  require(alpha >= 0.0 && std::isfinite(alpha), "alpha must be >= 0");
  require(beta >= 0.0 && std::isfinite(beta), "beta must be >= 0");
  require(temperature > 0.0, "temperature must be > 0");
  require(tau > 0.0, "tau must be > 0");
  require(momentum >= 0.0 && momentum <= 1.0, "momentum must lie in [0, 1]");
  require(K >= 1, "K must be >= 1");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(weight_decay >= 0.0, "weight_decay must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(epochs >= 1, "epochs must be >= 1");
  require(contrastive_users_per_batch >= 1, "contrastive_users_per_batch must be >= 1");
  require(propensity_clip > 0.0 && propensity_clip <= 1.0,
          "propensity_clip must lie in (0, 1]");
}

std::string to_string(ModelSelection s) {
  switch (s) {
    case ModelSelection::kMse: return "mse";
    case ModelSelection::kWeightedMse: return "weighted_mse";
    case ModelSelection::kObjective: return "objective";
  }
  return "mse";
}

ModelSelection parse_model_selection(const std::string& text) {
  if (text == "mse") return ModelSelection::kMse;
  if (text == "weighted_mse") return ModelSelection::kWeightedMse;
  if (text == "objective") return ModelSelection::kObjective;
  throw ArgumentError("unknown selection '" + text + "' (mse, weighted_mse, objective)");
}

bool EarlyStopping::update(double val_mse) {
  if (val_mse < best_) {
    best_ = val_mse;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

LossSpec loss_spec_from(const TrainConfig& config, const RatingScale& scale) {
  LossSpec spec;
  spec.alpha = config.alpha;
  spec.beta = config.beta;
  spec.temperature = config.temperature;
  spec.tau = config.tau;
  spec.stop_gradient_propensity = config.stop_gradient_propensity;
  spec.scale = scale;
  return spec;
}

namespace {

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t k = v.size(); k > 1; --k) {
    std::swap(v[k - 1], v[uniform_index(rng, k)]);
  }
}

// First `count` entries of `pool` become a uniform sample without
// replacement (partial Fisher-Yates).
template <typename T>
void sample_prefix(std::vector<T>& pool, std::size_t count, Rng& rng) {
  for (std::size_t k = 0; k < count; ++k) {
    std::swap(pool[k], pool[k + uniform_index(rng, pool.size() - k)]);
  }
}

CauNet make_network(const DataSplit& data, const TrainConfig& config) {
  CauNet net(data.train.n_users(), data.train.n_items(), config.K,
             config.encoder, {config.momentum, config.propensity_clip});
  net.initialize(config.seed, data.train.scale().mid());
  return net;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Validation ratings as positives plus one fixed unobserved pair each, drawn
// from cells observed in neither split.
// Class-balanced L_pro on the scale of L_base: both halves of a batch of b
// exposed and b unexposed cells are weighted as if each summed over the
// |D \ exposed| unexposed cells, normalized by the training-rating count.
double pair_weight(const DataSplit& data) {
  const double cells = static_cast<double>(data.train.n_users() * data.train.n_items());
  const double exposed = static_cast<double>(data.train.size() + data.validation.size());
  return 2.0 * (cells - exposed) / static_cast<double>(data.train.size());
}

std::vector<LabeledPair> validation_pairs(const DataSplit& data, std::uint64_t seed) {
  const auto& val = data.validation;
  std::vector<LabeledPair> pairs;
  const std::size_t n_users = data.train.n_users();
  const std::size_t n_items = data.train.n_items();
  if (val.empty() || data.train.size() + val.size() >= n_users * n_items) return pairs;
  const ObservationIndex train_index(data.train);
  const ObservationIndex val_index(val);
  auto rng = make_rng(seed, Stream::kValidation);
  const double weight = pair_weight(data);
  for (const auto& r : val.observed()) pairs.push_back({r.user, r.item, true, weight});
  for (std::size_t k = 0; k < val.size(); ++k) {
    UserIndex u;
    ItemIndex i;
    do {
      u = static_cast<UserIndex>(uniform_index(rng, n_users));
      i = static_cast<ItemIndex>(uniform_index(rng, n_items));
    } while (train_index.observed(u, i) || val_index.observed(u, i));
    pairs.push_back({u, i, false, weight});
  }
  return pairs;
}

struct Selector {
  ModelSelection mode = ModelSelection::kMse;
  double alpha = 0.0;
  std::vector<LabeledPair> pairs;

  double operator()(const CauNet& net, const InteractionDataset& val,
                    double plain_mse) const {
    if (val.empty() || mode == ModelSelection::kMse) return plain_mse;
    if (mode == ModelSelection::kWeightedMse) return weighted_validation_mse(net, val);
    const auto loss = causal_loss(net, net.params(), val.observed(), pairs,
                                  {alpha, true});
    return loss.total;
  }
};

void finish_epoch(TrainedCauNet& out, EpochLog log, const DataSplit& data,
                  const Selector& selector, EarlyStopping& stopper, ParamSet& best) {
  const auto val = validation_metrics(out.model, data.validation);
  log.val_mse = val.mse;
  log.val_mae = val.mae;
  log.val_selection = selector(out.model, data.validation, val.mse);
  out.report.epochs.push_back(log);
  if (stopper.update(log.val_selection) || data.validation.empty()) {
    best = out.model.params();
    out.report.best_epoch = log.epoch;
    out.report.best_val_mse = log.val_selection;
  }
}

}  // namespace

double weighted_validation_mse(const CauNet& net, const InteractionDataset& validation) {
  if (validation.empty()) throw ArgumentError("validation set is empty");
  const double clip = net.options().propensity_clip;
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : validation.observed()) {
    const auto b = net.forward(r.user, r.item);
    const double w = 1.0 / clipped_propensity(b.o_hat, clip);
    const double e = b.r1_hat - r.value;
    num += w * e * e;
    den += w;
  }
  return num / den;
}

TrainedCauNet train_counterclr(const DataSplit& data, const TrainConfig& config) {
  config.validate();
  const auto& train = data.train;
  if (train.empty()) throw ArgumentError("training set is empty");
  const auto t0 = std::chrono::steady_clock::now();

  TrainedCauNet out{make_network(data, config), {}};
  out.report.method = "counterclr";
  auto& net = out.model;
  const ObservationIndex index(train);
  const auto spec = loss_spec_from(config, train.scale());
  AdamState adam(net.params(), {config.learning_rate, 0.9, 0.999, 1e-8,
                                config.weight_decay});
  GradientMap grads(net.params());

  auto shuffle_rng = make_rng(config.seed, Stream::kShuffle);
  auto negative_rng = make_rng(config.seed, Stream::kNegatives);
  auto user_rng = make_rng(config.seed, Stream::kContrastUsers);
  auto item_rng = make_rng(config.seed, Stream::kContrastItems);

  const std::size_t n_users = train.n_users();
  const std::size_t n_items = train.n_items();
  // Validation cells are exposed (o = 1) even though their ratings are held
  // out, so L_pro draws its positives from train and validation alike.
  std::vector<Rating> exposed_cells(train.observed().begin(), train.observed().end());
  exposed_cells.insert(exposed_cells.end(), data.validation.observed().begin(),
                       data.validation.observed().end());
  const ObservationIndex exposed(
      InteractionDataset(n_users, n_items, exposed_cells, train.scale()));
  const bool has_unobserved = exposed.total() < n_users * n_items;
  const double weight = pair_weight(data);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<UserIndex> user_pool(n_users);
  std::iota(user_pool.begin(), user_pool.end(), 0);
  std::vector<ItemIndex> item_pool(n_items);
  std::iota(item_pool.begin(), item_pool.end(), 0);
  const std::size_t n_contrast_users =
      std::min(config.contrastive_users_per_batch, n_users);
  const bool item_subsample =
      config.contrastive_items > 0 && config.contrastive_items < n_items;

  EarlyStopping stopper(config.patience);
  ParamSet best = net.params();
  TrainingBatch batch;
  Selector selector{config.selection, config.alpha, {}};
  if (config.selection == ModelSelection::kObjective) {
    selector.pairs = validation_pairs(data, config.seed);
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      batch.observed.clear();
      batch.propensity_pairs.clear();
      for (std::size_t k = start; k < end; ++k) {
        batch.observed.push_back(train.observed()[order[k]]);
      }
      if (has_unobserved) {
        for (std::size_t k = start; k < end; ++k) {
          const auto& r = exposed_cells[uniform_index(negative_rng, exposed_cells.size())];
          batch.propensity_pairs.push_back({r.user, r.item, true, weight});
        }
        for (std::size_t k = start; k < end; ++k) {
          UserIndex u;
          ItemIndex i;
          do {
            u = static_cast<UserIndex>(uniform_index(negative_rng, n_users));
            i = static_cast<ItemIndex>(uniform_index(negative_rng, n_items));
          } while (exposed.observed(u, i));
          batch.propensity_pairs.push_back({u, i, false, weight});
        }
      }
      sample_prefix(user_pool, n_contrast_users, user_rng);
      batch.contrast_users.assign(user_pool.begin(),
                                  user_pool.begin() + static_cast<long>(n_contrast_users));
      if (item_subsample) {
        sample_prefix(item_pool, config.contrastive_items, item_rng);
        batch.contrast_items.emplace(
            item_pool.begin(), item_pool.begin() + static_cast<long>(config.contrastive_items));
      }

      grads.zero();
      LossBreakdown loss;
      try {
        loss = compute_loss_and_grads(net, net.params(), index, batch, spec, &grads);
      } catch (const NumericalError& e) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(out.report.steps) + ": " +
                             e.what());
      }
      adam.apply(net.params(), grads);
      net.momentum_update();

      log.base += loss.base;
      log.propensity += loss.propensity;
      log.contrastive += loss.contrastive;
      ++steps;
      ++out.report.steps;
      if (config.record_step_losses) out.report.step_losses.push_back(loss.total);
    }
    const double n = static_cast<double>(std::max<std::size_t>(steps, 1));
    log.base /= n;
    log.propensity /= n;
    log.contrastive /= n;
    log.total = log.base + config.alpha * log.propensity + config.beta * log.contrastive;
    finish_epoch(out, log, data, selector, stopper, best);
    if (stopper.should_stop()) break;
  }
  net.params() = best;
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

TrainedCauNet train_exposure_mse(const DataSplit& data, const TrainConfig& config) {
  config.validate();
  const auto& train = data.train;
  if (train.empty()) throw ArgumentError("training set is empty");
  const auto t0 = std::chrono::steady_clock::now();

  TrainedCauNet out{make_network(data, config), {}};
  out.report.method = "exposure-mse";
  auto& net = out.model;
  AdamState adam(net.params(), {config.learning_rate, 0.9, 0.999, 1e-8,
                                config.weight_decay});
  GradientMap grads(net.params());
  auto shuffle_rng = make_rng(config.seed, Stream::kShuffle);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  EarlyStopping stopper(config.patience);
  ParamSet best = net.params();
  EncoderTrace trace;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle(order, shuffle_rng);
    EpochLog log;
    log.epoch = epoch;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const double b = static_cast<double>(end - start);
      grads.zero();
      double loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& r = train.observed()[order[k]];
        const double err = net.trace_exposure(net.params(), r.user, r.item, trace) - r.value;
        loss += err * err;
        net.backward(net.params(), r.user, r.item, trace, 2.0 * err / b, 0.0, 0.0, grads);
      }
      loss /= b;
      if (!std::isfinite(loss)) {
        throw NumericalError("training diverged at epoch " + std::to_string(epoch));
      }
      adam.apply(net.params(), grads);
      net.momentum_update();
      log.base += loss;
      ++steps;
      ++out.report.steps;
      if (config.record_step_losses) out.report.step_losses.push_back(loss);
    }
    log.base /= static_cast<double>(std::max<std::size_t>(steps, 1));
    log.total = log.base;
    finish_epoch(out, log, data, Selector{}, stopper, best);
    if (stopper.should_stop()) break;
  }
  net.params() = best;
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

void set_config_field(TrainConfig& c, const std::string& name, double v) {
  auto count = [&](const char* field) {
    if (!(v >= 0.0) || v != std::floor(v)) {
      throw ArgumentError(std::string(field) + " must be a non-negative integer");
    }
    return static_cast<std::size_t>(v);
  };
  if (name == "alpha") c.alpha = v;
  else if (name == "beta") c.beta = v;
  else if (name == "temperature") c.temperature = v;
  else if (name == "tau") c.tau = v;
  else if (name == "momentum") c.momentum = v;
  else if (name == "K") c.K = count("K");
  else if (name == "learning_rate") c.learning_rate = v;
  else if (name == "weight_decay") c.weight_decay = v;
  else if (name == "batch_size") c.batch_size = count("batch_size");
  else if (name == "epochs") c.epochs = count("epochs");
  else if (name == "contrastive_users_per_batch") c.contrastive_users_per_batch = count("contrastive_users_per_batch");
  else if (name == "propensity_clip") c.propensity_clip = v;
  else throw ArgumentError("unknown grid field '" + name + "'");
}

std::vector<TrainConfig> expand_grid(const TrainConfig& base, const ConfigGrid& grid) {
  std::vector<TrainConfig> points{base};
  for (const auto& [name, values] : grid) {
    if (values.empty()) throw ArgumentError("grid field '" + name + "' has no values");
    std::vector<TrainConfig> next;
    for (const auto& p : points) {
      for (double v : values) {
        auto c = p;
        set_config_field(c, name, v);
        next.push_back(c);
      }
    }
    points = std::move(next);
  }
  return points;
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      for (std::size_t k; (k = next.fetch_add(1)) < n;) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

GridResult grid_search(const TrainConfig& base, const ConfigGrid& grid,
                       const GridTrainer& train_fn, std::size_t threads) {
  const auto configs = expand_grid(base, grid);
  GridResult result;
  result.points.resize(configs.size());
  parallel_for(configs.size(), threads, [&](std::size_t k) {
    auto& point = result.points[k];
    point.config = configs[k];
    try {
      point.val_mse = train_fn(configs[k]);
      if (!std::isfinite(point.val_mse)) {
        point.diverged = true;
        point.val_mse = std::numeric_limits<double>::infinity();
      }
    } catch (const NumericalError& e) {
      point.diverged = true;
      point.val_mse = std::numeric_limits<double>::infinity();
      point.message = e.what();
    }
  });
  for (std::size_t k = 1; k < result.points.size(); ++k) {
    if (result.points[k].val_mse < result.points[result.best].val_mse) result.best = k;
  }
  return result;
}

GridResult grid_search(const DataSplit& data, const TrainConfig& base,
                       const ConfigGrid& grid, std::size_t threads) {
  return grid_search(
      base, grid,
      [&](const TrainConfig& c) {
        const auto run = train_counterclr(data, c);
        return run.report.epochs[run.report.best_epoch].val_mse;
      },
      threads);
}

std::string grid_csv_header() {
  return "alpha,beta,temperature,tau,momentum,K,learning_rate,weight_decay,"
         "batch_size,epochs,seed,val_mse,diverged";
}

std::string grid_csv_row(const GridPoint& p) {
  const auto& c = p.config;
  std::ostringstream os;
  os << format_double(c.alpha) << ',' << format_double(c.beta) << ','
     << format_double(c.temperature) << ',' << format_double(c.tau) << ','
     << format_double(c.momentum) << ',' << c.K << ','
     << format_double(c.learning_rate) << ',' << format_double(c.weight_decay)
     << ',' << c.batch_size << ',' << c.epochs << ',' << c.seed << ','
     << (p.diverged ? "inf" : format_double(p.val_mse)) << ','
     << (p.diverged ? 1 : 0);
  return os.str();
}

}  // namespace counterclr
