#include "counterclr/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

#include "counterclr/adam.hpp"
#include "counterclr/error.hpp"
#include "counterclr/metrics.hpp"
#include "counterclr/ops.hpp"
#include "counterclr/rng.hpp"

namespace counterclr {

MfModel::MfModel(std::size_t n_users, std::size_t n_items, std::size_t dim)
    : backbone_(params_, n_users, n_items, dim, EncoderConfig{}) {}

void MfModel::initialize(std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::kInit);
  backbone_.initialize(params_, rng);
}

double MfModel::predict(UserIndex u, ItemIndex i) const {
  return predict(params_, u, i);
}

double MfModel::predict(const ParamSet& params, UserIndex u, ItemIndex i) const {
  return mf_predict(backbone_.tables(params), u, i);
}

void MfModel::backward(const ParamSet& params, UserIndex u, ItemIndex i,
                       double d_r, GradientMap& grads) const {
  const std::size_t K = backbone_.dim();
  const auto t = backbone_.tables(params);
  const auto eu = t.user(u);
  const auto ei = t.item(i);
  auto gu = grads[backbone_.user_block()].subspan(u * K, K);
  auto gi = grads[backbone_.item_block()].subspan(i * K, K);
  for (std::size_t k = 0; k < K; ++k) {
    gu[k] += d_r * ei[k];
    gi[k] += d_r * eu[k];
  }
}

double naive_loss(std::span<const double> errors) {
  if (errors.empty()) throw ArgumentError("naive loss needs a nonempty batch");
  return std::accumulate(errors.begin(), errors.end(), 0.0) /
         static_cast<double>(errors.size());
}

double ips_loss(std::span<const double> errors,
                std::span<const double> propensities, double population_size) {
  if (errors.empty()) throw ArgumentError("ips loss needs a nonempty batch");
  if (errors.size() != propensities.size()) {
    throw ArgumentError("ips loss: one propensity per error");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < errors.size(); ++k) s += errors[k] / propensities[k];
  return s / population_size;
}

double snips_loss(std::span<const double> errors,
                  std::span<const double> propensities) {
  if (errors.empty()) throw ArgumentError("snips loss needs a nonempty batch");
  if (errors.size() != propensities.size()) {
    throw ArgumentError("snips loss: one propensity per error");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    num += errors[k] / propensities[k];
    den += 1.0 / propensities[k];
  }
  return num / den;
}

double dr_loss(std::span<const DrTerm> terms, double population_size) {
  if (terms.empty()) throw ArgumentError("dr loss needs a nonempty batch");
  double s = 0.0;
  for (const auto& t : terms) {
    s += t.imputed_error;
    if (t.observed) s += (t.error - t.imputed_error) / t.propensity;
  }
  return s / population_size;
}

PropensityModel::PropensityModel(const EmbeddingTables& features, double clip)
    : features_user_(features.user_table.begin(), features.user_table.end()),
      features_item_(features.item_table.begin(), features.item_table.end()),
      dim_(features.dim),
      clip_(clip) {
  if (!(clip > 0.0 && clip < 1.0)) throw ArgumentError("propensity clip must lie in (0, 1)");
  params_.add("weight", {2 * dim_});
  params_.add("user_bias", {features.n_users()});
  params_.add("item_bias", {features.n_items()});
  params_.add("intercept", {1});
}

double PropensityModel::logit(UserIndex u, ItemIndex i) const {
  const auto& w = params_[0].values;
  double s = params_[3].values[0] + params_[1].values[u] + params_[2].values[i];
  for (std::size_t k = 0; k < dim_; ++k) {
    s += w[k] * features_user_[u * dim_ + k] + w[dim_ + k] * features_item_[i * dim_ + k];
  }
  return s;
}

double PropensityModel::predict(UserIndex u, ItemIndex i) const {
  const double p = sigmoid(logit(u, i));
  return std::clamp(p, clip_, std::nextafter(1.0, 0.0));
}

void PropensityModel::fit(const InteractionDataset& train, std::size_t epochs,
                          std::size_t batch_size, double learning_rate,
                          std::uint64_t seed) {
  const std::size_t n_users = train.n_users();
  const std::size_t n_items = train.n_items();
  const std::size_t n_total = n_users * n_items;
  const std::size_t n_obs = train.size();
  if (n_obs == 0 || n_obs == n_total) {
    // Degenerate exposure: a constant propensity is exact.
    const double ratio = n_total ? static_cast<double>(n_obs) / n_total : 1.0;
    params_[3].values[0] = ratio >= 1.0 ? 50.0 : std::log(ratio / (1.0 - ratio));
    return;
  }
  ObservationIndex index(train);
  AdamState adam(params_, {learning_rate, 0.9, 0.999, 1e-8, 0.0});
  GradientMap grads(params_);
  auto rng = make_rng(seed, Stream::kPropensityModel);
  std::vector<std::size_t> order(n_obs);
  std::iota(order.begin(), order.end(), 0);

  auto accumulate = [&](UserIndex u, ItemIndex i, double label, double scale) {
    const double d = scale * (sigmoid(logit(u, i)) - label);
    auto gw = grads[0];
    for (std::size_t k = 0; k < dim_; ++k) {
      gw[k] += d * features_user_[u * dim_ + k];
      gw[dim_ + k] += d * features_item_[i * dim_ + k];
    }
    grads[1][u] += d;
    grads[2][i] += d;
    grads[3][0] += d;
  };

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t k = n_obs; k > 1; --k) {
      std::swap(order[k - 1], order[uniform_index(rng, k)]);
    }
    for (std::size_t start = 0; start < n_obs; start += batch_size) {
      const std::size_t end = std::min(n_obs, start + batch_size);
      const double scale = 1.0 / (2.0 * static_cast<double>(end - start));
      grads.zero();
      for (std::size_t k = start; k < end; ++k) {
        const auto& r = train.observed()[order[k]];
        accumulate(r.user, r.item, 1.0, scale);
        UserIndex u;
        ItemIndex i;
        do {
          u = static_cast<UserIndex>(uniform_index(rng, n_users));
          i = static_cast<ItemIndex>(uniform_index(rng, n_items));
        } while (index.observed(u, i));
        accumulate(u, i, 0.0, scale);
      }
      adam.apply(params_, grads);
    }
  }
  // Balanced sampling inflates the odds by n_unobserved / n_observed.
  params_[3].values[0] +=
      std::log(static_cast<double>(n_obs) / static_cast<double>(n_total - n_obs));
}

std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::kNaive: return "naive";
    case BaselineMethod::kIps: return "ips";
    case BaselineMethod::kSnips: return "snips";
    case BaselineMethod::kDr: return "dr";
  }
  return "unknown";
}

namespace {

struct BaselineContext {
  const InteractionDataset& train;
  const InteractionDataset& validation;
  const TrainConfig& config;
  const PropensityModel* propensity = nullptr;
};

// Squared error and its derivative for one observed pair.
struct PairError {
  double error;
  double d_error;  // d(error)/d(prediction)
};

TrainedMf fit_mf(BaselineMethod method, const BaselineContext& ctx) {
  const auto start_time = std::chrono::steady_clock::now();
  const auto& train = ctx.train;
  const auto& cfg = ctx.config;
  const std::size_t n_users = train.n_users();
  const std::size_t n_items = train.n_items();
  const double n_total = static_cast<double>(n_users * n_items);
  const double n_obs = static_cast<double>(train.size());

  TrainedMf out{MfModel(n_users, n_items, cfg.K), {}};
  out.report.method = to_string(method);
  auto& model = out.model;
  model.initialize(cfg.seed);

  MfModel imputation;
  std::optional<AdamState> imputation_adam;
  if (method == BaselineMethod::kDr) {
    imputation = MfModel(n_users, n_items, cfg.K);
    imputation.initialize(mix_seed(cfg.seed));
    imputation_adam.emplace(imputation.params(),
                            AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8,
                                       cfg.weight_decay});
  }

  AdamState adam(model.params(), {cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.weight_decay});
  GradientMap grads(model.params());
  GradientMap imputation_grads = imputation_adam ? GradientMap(imputation.params())
                                                 : GradientMap();
  auto shuffle_rng = make_rng(cfg.seed, Stream::kShuffle);
  auto pair_rng = make_rng(cfg.seed, Stream::kImputation);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> errors;
  std::vector<double> props;
  std::vector<double> d_errors;
  EarlyStopping stopper(cfg.patience);
  ParamSet best = model.params();

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = order.size(); k > 1; --k) {
      std::swap(order[k - 1], order[uniform_index(shuffle_rng, k)]);
    }
    double epoch_loss = 0.0;
    std::size_t epoch_steps = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const std::size_t b = end - start;
      errors.resize(b);
      props.resize(b);
      d_errors.assign(b, 0.0);
      std::vector<double> preds(b);
      for (std::size_t k = 0; k < b; ++k) {
        const auto& r = train.observed()[order[start + k]];
        preds[k] = model.predict(r.user, r.item);
        const double e = preds[k] - r.value;
        errors[k] = e * e;
        props[k] = ctx.propensity ? ctx.propensity->predict(r.user, r.item) : 1.0;
      }

      double loss = 0.0;
      grads.zero();
      switch (method) {
        case BaselineMethod::kNaive: {
          loss = naive_loss(errors);
          for (std::size_t k = 0; k < b; ++k) d_errors[k] = 1.0 / static_cast<double>(b);
          break;
        }
        case BaselineMethod::kIps: {
          // Batch-normalized; the |D|-normalized estimator scaled by |D|/|O|.
          loss = ips_loss(errors, props, static_cast<double>(b));
          for (std::size_t k = 0; k < b; ++k) {
            d_errors[k] = 1.0 / props[k] / static_cast<double>(b);
          }
          break;
        }
        case BaselineMethod::kSnips: {
          loss = snips_loss(errors, props);
          double den = 0.0;
          for (double p : props) den += 1.0 / p;
          for (std::size_t k = 0; k < b; ++k) d_errors[k] = 1.0 / props[k] / den;
          break;
        }
        case BaselineMethod::kDr: {
          // Imputation step: IPS-weighted regression of r_tilde on observed r.
          imputation_grads.zero();
          for (std::size_t k = 0; k < b; ++k) {
            const auto& r = train.observed()[order[start + k]];
            const double e = imputation.predict(r.user, r.item) - r.value;
            imputation.backward(imputation.params(), r.user, r.item,
                                2.0 * e / props[k] / static_cast<double>(b),
                                imputation_grads);
          }
          imputation_adam->apply(imputation.params(), imputation_grads);

          // Prediction step on (1/|D|) sum_D [e_hat + o (e - e_hat) / p] with
          // e_hat = (r_hat - r_tilde)^2, r_tilde held fixed: a uniform pair
          // sample estimates the imputed term, the observed batch the
          // correction term.
          std::vector<DrTerm> terms(b);
          for (std::size_t k = 0; k < b; ++k) {
            const auto& r = train.observed()[order[start + k]];
            const double gap = preds[k] - imputation.predict(r.user, r.item);
            terms[k] = {gap * gap, true, errors[k], props[k]};
            // d/dr_hat [(e - e_hat)/p] = 2 (r_tilde - r) / p
            model.backward(model.params(), r.user, r.item,
                           (n_obs / n_total) * 2.0 *
                               (imputation.predict(r.user, r.item) - r.value) /
                               props[k] / static_cast<double>(b),
                           grads);
          }
          double correction = 0.0;
          for (const auto& t : terms) correction += (t.error - t.imputed_error) / t.propensity;
          double imputed = 0.0;
          for (std::size_t k = 0; k < b; ++k) {
            const auto u = static_cast<UserIndex>(uniform_index(pair_rng, n_users));
            const auto i = static_cast<ItemIndex>(uniform_index(pair_rng, n_items));
            const double gap = model.predict(u, i) - imputation.predict(u, i);
            imputed += gap * gap;
            model.backward(model.params(), u, i, 2.0 * gap / static_cast<double>(b), grads);
          }
          loss = imputed / static_cast<double>(b) +
                 (n_obs / n_total) * correction / static_cast<double>(b);
          break;
        }
      }
      if (method != BaselineMethod::kDr) {
        for (std::size_t k = 0; k < b; ++k) {
          const auto& r = train.observed()[order[start + k]];
          const double e = preds[k] - r.value;
          model.backward(model.params(), r.user, r.item, d_errors[k] * 2.0 * e, grads);
        }
      }
      if (!std::isfinite(loss)) {
        throw NumericalError(out.report.method + " diverged at epoch " +
                             std::to_string(epoch) + ", step " +
                             std::to_string(out.report.steps));
      }
      grads.check_finite(out.report.method);
      adam.apply(model.params(), grads);
      epoch_loss += loss;
      ++epoch_steps;
      ++out.report.steps;
      if (cfg.record_step_losses) out.report.step_losses.push_back(loss);
    }

    EpochLog log;
    log.epoch = epoch;
    log.base = epoch_loss / static_cast<double>(std::max<std::size_t>(1, epoch_steps));
    log.total = log.base;
    const auto val = validation_metrics(model, ctx.validation);
    log.val_mse = val.mse;
    log.val_mae = val.mae;
    out.report.epochs.push_back(log);
    if (stopper.update(val.mse) || ctx.validation.empty()) {
      best = model.params();
      out.report.best_epoch = epoch;
      out.report.best_val_mse = val.mse;
    }
    if (stopper.should_stop()) break;
  }
  model.params() = best;
  out.report.wall_seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - start_time)
                                .count();
  return out;
}

}  // namespace

TrainedMf train_baseline(BaselineMethod method, const InteractionDataset& train,
                         const InteractionDataset& validation,
                         const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw ArgumentError("training set is empty");
  BaselineContext ctx{train, validation, config, nullptr};
  if (method == BaselineMethod::kNaive) return fit_mf(method, ctx);

  const auto naive = fit_mf(BaselineMethod::kNaive, ctx);
  PropensityModel propensity(naive.model.tables(), config.propensity_clip);
  propensity.fit(train, config.propensity_epochs, config.batch_size,
                 config.learning_rate, config.seed);
  ctx.propensity = &propensity;
  return fit_mf(method, ctx);
}

}  // namespace counterclr
