#include "counterclr/backbone.hpp"

#include <algorithm>
#include <cmath>

#include "counterclr/error.hpp"

namespace counterclr {

std::string to_string(EncoderMode mode) {
  return mode == EncoderMode::kMf ? "mf" : "ncf";
}

EncoderMode parse_encoder_mode(const std::string& text) {
  if (text == "mf") return EncoderMode::kMf;
  if (text == "ncf") return EncoderMode::kNcf;
  throw ArgumentError("unknown encoder mode '" + text + "' (mf, ncf)");
}

namespace {

void check_pair(const EmbeddingTables& tables, UserIndex u, ItemIndex i) {
  if (u >= tables.n_users() || i >= tables.n_items()) {
    throw ArgumentError("pair index out of range");
  }
}

}  // namespace

std::vector<double> pair_embedding(const EmbeddingTables& tables, UserIndex u,
                                   ItemIndex i) {
  check_pair(tables, u, i);
  std::vector<double> x(2 * tables.dim);
  std::ranges::copy(tables.user(u), x.begin());
  std::ranges::copy(tables.item(i), x.begin() + static_cast<long>(tables.dim));
  return x;
}

double mf_predict(const EmbeddingTables& tables, UserIndex u, ItemIndex i) {
  check_pair(tables, u, i);
  return dot(tables.user(u), tables.item(i));
}

Backbone::Backbone(ParamSet& params, std::size_t n_users, std::size_t n_items,
                   std::size_t dim, EncoderConfig encoder)
    : n_users_(n_users), n_items_(n_items), dim_(dim), encoder_(std::move(encoder)) {
  if (dim == 0) throw ArgumentError("embedding dimension must be >= 1");
  user_block_ = params.add("user_embedding", {n_users, dim});
  item_block_ = params.add("item_embedding", {n_items, dim});
  widths_.push_back(2 * dim);
  if (encoder_.mode == EncoderMode::kNcf) {
    if (encoder_.hidden_dims.empty()) encoder_.hidden_dims = {2 * dim};
    if (encoder_.z_dim == 0) encoder_.z_dim = dim;
    for (auto h : encoder_.hidden_dims) widths_.push_back(h);
    widths_.push_back(encoder_.z_dim);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      if (widths_[l + 1] == 0) throw ArgumentError("encoder width must be >= 1");
      const auto prefix = "encoder." + std::to_string(l);
      weight_blocks_.push_back(
          params.add(prefix + ".weight", {widths_[l + 1], widths_[l]}));
      bias_blocks_.push_back(params.add(prefix + ".bias", {widths_[l + 1]}));
    }
  } else {
    encoder_.hidden_dims.clear();
    encoder_.z_dim = 3 * dim;
    widths_.push_back(3 * dim);
  }
}

void Backbone::initialize(ParamSet& params, Rng& rng) const {
  for (auto& v : params[user_block_].values) v = 0.1 * standard_normal(rng);
  for (auto& v : params[item_block_].values) v = 0.1 * standard_normal(rng);
  for (std::size_t l = 0; l < weight_blocks_.size(); ++l) {
    const double sd = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    for (auto& v : params[weight_blocks_[l]].values) v = sd * standard_normal(rng);
    auto& b = params[bias_blocks_[l]].values;
    std::fill(b.begin(), b.end(), 0.0);
  }
}

EmbeddingTables Backbone::tables(const ParamSet& params) const {
  return {params[user_block_].values, params[item_block_].values, dim_};
}

void Backbone::forward(const ParamSet& params, UserIndex u, ItemIndex i,
                       EncoderTrace& trace) const {
  if (u >= n_users_ || i >= n_items_) throw ArgumentError("pair index out of range");
  trace.layers.resize(widths_.size());
  auto& x = trace.layers[0];
  x.resize(2 * dim_);
  const auto& users = params[user_block_].values;
  const auto& items = params[item_block_].values;
  std::copy_n(users.begin() + static_cast<long>(u * dim_), dim_, x.begin());
  std::copy_n(items.begin() + static_cast<long>(i * dim_), dim_,
              x.begin() + static_cast<long>(dim_));
  encode(params, trace.layers[0], trace);
}

void Backbone::encode(const ParamSet& params, std::span<const double> x,
                      EncoderTrace& trace) const {
  if (x.size() != widths_[0]) throw ArgumentError("encoder input has wrong length");
  trace.layers.resize(widths_.size());
  if (trace.layers[0].data() != x.data()) {
    trace.layers[0].assign(x.begin(), x.end());
  }
  if (encoder_.mode == EncoderMode::kMf) {
    const auto& in = trace.layers[0];
    auto& z = trace.layers[1];
    z.resize(3 * dim_);
    for (std::size_t k = 0; k < 2 * dim_; ++k) z[k] = in[k];
    for (std::size_t k = 0; k < dim_; ++k) z[2 * dim_ + k] = in[k] * in[dim_ + k];
    return;
  }
  for (std::size_t l = 0; l < weight_blocks_.size(); ++l) {
    const auto& w = params[weight_blocks_[l]].values;
    const auto& b = params[bias_blocks_[l]].values;
    const auto& in = trace.layers[l];
    auto& out = trace.layers[l + 1];
    const std::size_t n_in = widths_[l];
    out.resize(widths_[l + 1]);
    for (std::size_t o = 0; o < out.size(); ++o) {
      double s = b[o];
      for (std::size_t j = 0; j < n_in; ++j) s += w[o * n_in + j] * in[j];
      out[o] = std::tanh(s);
    }
  }
}

void Backbone::backward(const ParamSet& params, UserIndex u, ItemIndex i,
                        const EncoderTrace& trace, std::span<const double> dz,
                        GradientMap& grads) const {
  thread_local std::vector<double> upstream;
  thread_local std::vector<double> next;
  if (encoder_.mode == EncoderMode::kMf) {
    const auto& x = trace.layers[0];
    upstream.assign(dz.begin(), dz.begin() + static_cast<long>(2 * dim_));
    for (std::size_t k = 0; k < dim_; ++k) {
      upstream[k] += dz[2 * dim_ + k] * x[dim_ + k];
      upstream[dim_ + k] += dz[2 * dim_ + k] * x[k];
    }
  } else {
    upstream.assign(dz.begin(), dz.end());
  }
  for (std::size_t l = weight_blocks_.size(); l-- > 0;) {
    const auto& w = params[weight_blocks_[l]].values;
    const auto& in = trace.layers[l];
    const auto& out = trace.layers[l + 1];
    const std::size_t n_in = widths_[l];
    next.assign(n_in, 0.0);
    const bool w_grad = grads.has(weight_blocks_[l]);
    const bool b_grad = grads.has(bias_blocks_[l]);
    auto gw = grads[weight_blocks_[l]];
    auto gb = grads[bias_blocks_[l]];
    for (std::size_t o = 0; o < out.size(); ++o) {
      const double pre = upstream[o] * (1.0 - out[o] * out[o]);
      if (pre == 0.0) continue;
      if (b_grad) gb[o] += pre;
      for (std::size_t j = 0; j < n_in; ++j) {
        if (w_grad) gw[o * n_in + j] += pre * in[j];
        next[j] += pre * w[o * n_in + j];
      }
    }
    upstream.swap(next);
  }
  if (grads.has(user_block_)) {
    auto gu = grads[user_block_].subspan(u * dim_, dim_);
    for (std::size_t k = 0; k < dim_; ++k) gu[k] += upstream[k];
  }
  if (grads.has(item_block_)) {
    auto gi = grads[item_block_].subspan(i * dim_, dim_);
    for (std::size_t k = 0; k < dim_; ++k) gi[k] += upstream[dim_ + k];
  }
}

}  // namespace counterclr
