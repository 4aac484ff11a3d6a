#include "counterclr/preference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "counterclr/error.hpp"
#include "counterclr/ops.hpp"

namespace counterclr {

double softmax_cross_entropy(std::span<const double> logits,
                             std::size_t target, std::span<double> d_logits) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double l : logits) denom += std::exp(l - peak);
  const double loss = std::log(denom) - (logits[target] - peak);
  if (!d_logits.empty()) {
    for (std::size_t k = 0; k < logits.size(); ++k) {
      d_logits[k] = std::exp(logits[k] - peak) / denom;
    }
    d_logits[target] -= 1.0;
  }
  return loss;
}

RatingVectorPair assemble_rating_vectors(
    const CauNet& net, const ParamSet& params, const ObservationIndex& index,
    UserIndex u, std::optional<std::span<const ItemIndex>> item_subset) {
  if (u >= net.backbone().n_users()) throw ArgumentError("user out of range");
  RatingVectorPair out;
  if (item_subset) {
    if (item_subset->empty()) throw ArgumentError("empty item subset");
    out.items.assign(item_subset->begin(), item_subset->end());
  } else {
    out.items.resize(net.backbone().n_items());
    for (std::size_t i = 0; i < out.items.size(); ++i) {
      out.items[i] = static_cast<ItemIndex>(i);
    }
  }
  const auto n = out.items.size();
  out.exposure.resize(n);
  out.nonexposure.resize(n);
  out.observed.resize(n);
  CauNet::Trace t;
  for (std::size_t k = 0; k < n; ++k) {
    const auto item = out.items[k];
    if (item >= net.backbone().n_items()) throw ArgumentError("item out of range");
    net.trace(params, u, item, t);
    const auto r = index.rating(u, item);
    out.observed[k] = r.has_value();
    out.exposure[k] = r ? *r : t.r1;
    out.nonexposure[k] = t.r0;
  }
  return out;
}

double preference_threshold(std::size_t k, std::size_t K,
                            const RatingScale& scale) {
  const double kk = static_cast<double>(k);
  const double big_k = static_cast<double>(K);
  return kk / big_k * scale.r_max + (big_k - kk) / big_k * scale.r_min;
}

PreferenceEmbedding extract_preference(std::span<const double> r_vec,
                                       std::size_t K, const RatingScale& scale,
                                       double tau) {
  if (r_vec.empty()) throw ArgumentError("preference extractor needs M >= 1");
  if (K == 0) throw ArgumentError("preference extractor needs K >= 1");
  if (!(tau > 0.0)) throw ArgumentError("preference scale tau must be > 0");
  PreferenceEmbedding f{std::vector<double>(K, 0.0), tau, scale};
  for (std::size_t k = 0; k < K; ++k) {
    const double threshold = preference_threshold(k + 1, K, scale);
    double s = 0.0;
    for (double r : r_vec) s += sigmoid(tau * (threshold - r));
    f.values[k] = s / static_cast<double>(r_vec.size());
  }
  return f;
}

void extract_preference_backward(std::span<const double> r_vec,
                                 const RatingScale& scale, double tau,
                                 std::span<const double> d_f,
                                 std::span<double> d_r) {
  const std::size_t K = d_f.size();
  const double coef = -tau / static_cast<double>(r_vec.size());
  for (std::size_t k = 0; k < K; ++k) {
    if (d_f[k] == 0.0) continue;
    const double threshold = preference_threshold(k + 1, K, scale);
    const double c = coef * d_f[k];
    for (std::size_t i = 0; i < r_vec.size(); ++i) {
      const double s = sigmoid(tau * (threshold - r_vec[i]));
      d_r[i] += c * s * (1.0 - s);
    }
  }
}

ContrastiveResult contrastive_loss(
    std::span<const UserIndex> users,
    std::span<const std::vector<double>> exposure,
    std::span<const std::vector<double>> nonexposure, double temperature,
    bool with_gradients) {
  const std::size_t b = users.size();
  if (b == 0) throw ArgumentError("contrastive batch needs at least one user");
  if (exposure.size() != b || nonexposure.size() != b) {
    throw ArgumentError("contrastive batch size mismatch");
  }
  if (!(temperature > 0.0)) throw ArgumentError("temperature must be > 0");
  std::unordered_set<UserIndex> distinct(users.begin(), users.end());
  if (distinct.size() != b) {
    throw ArgumentError("duplicate users in contrastive batch");
  }

  ContrastiveResult out;
  out.per_user.resize(b);
  if (with_gradients) {
    out.d_exposure.assign(b, std::vector<double>(exposure[0].size(), 0.0));
    out.d_nonexposure.assign(b, std::vector<double>(nonexposure[0].size(), 0.0));
  }
  std::vector<double> logits(b);
  std::vector<double> d_logits(with_gradients ? b : 0);
  for (std::size_t u = 0; u < b; ++u) {
    for (std::size_t v = 0; v < b; ++v) {
      logits[v] = dot(exposure[u], nonexposure[v]) / temperature;
    }
    out.per_user[u] = softmax_cross_entropy(logits, u, d_logits);
    out.total += out.per_user[u];
    if (!with_gradients) continue;
    for (std::size_t v = 0; v < b; ++v) {
      const double g = d_logits[v] / temperature;
      if (g == 0.0) continue;
      auto& du = out.d_exposure[u];
      auto& dv = out.d_nonexposure[v];
      for (std::size_t k = 0; k < du.size(); ++k) {
        du[k] += g * nonexposure[v][k];
        dv[k] += g * exposure[u][k];
      }
    }
  }
  if (!std::isfinite(out.total)) throw NumericalError("non-finite L_con");
  return out;
}

}  // namespace counterclr
