#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "counterclr/data.hpp"
#include "counterclr/ops.hpp"
#include "counterclr/params.hpp"
#include "counterclr/rng.hpp"

namespace counterclr {

enum class EncoderMode { kMf, kNcf };

std::string to_string(EncoderMode mode);
EncoderMode parse_encoder_mode(const std::string& text);

struct EncoderConfig {
  EncoderMode mode = EncoderMode::kMf;
  // ncf only; empty means one hidden layer of width 2K.
  std::vector<std::size_t> hidden_dims;
  // ncf only; 0 means K.
  std::size_t z_dim = 0;
};

// Read-only view of the user/item embedding tables (row-major, K columns).
struct EmbeddingTables {
  std::span<const double> user_table;
  std::span<const double> item_table;
  std::size_t dim = 0;

  std::size_t n_users() const { return user_table.size() / dim; }
  std::size_t n_items() const { return item_table.size() / dim; }
  std::span<const double> user(UserIndex u) const {
    return user_table.subspan(u * dim, dim);
  }
  std::span<const double> item(ItemIndex i) const {
    return item_table.subspan(i * dim, dim);
  }
};

// x_{u,i} = (e_u, e_i), user part first. Throws ArgumentError on bad indices.
std::vector<double> pair_embedding(const EmbeddingTables& tables, UserIndex u,
                                   ItemIndex i);
// e_u^T e_i.
double mf_predict(const EmbeddingTables& tables, UserIndex u, ItemIndex i);

// Activations of one encoder pass; layers[0] is the input x and
// layers.back() is z.
struct EncoderTrace {
  std::vector<std::vector<double>> layers;
  std::span<const double> z() const { return layers.back(); }
};

// Embedding tables plus the encoder W1, registered into a ParamSet. In mf mode
// the encoder has no weights and z = (e_u, e_i, e_u * e_i), so an affine head
// on z contains the inner product e_u^T e_i. In ncf mode z is a tanh MLP of x.
class Backbone {
 public:
  Backbone() = default;
  Backbone(ParamSet& params, std::size_t n_users, std::size_t n_items,
           std::size_t dim, EncoderConfig encoder);

  std::size_t n_users() const { return n_users_; }
  std::size_t n_items() const { return n_items_; }
  std::size_t dim() const { return dim_; }
  std::size_t z_dim() const { return widths_.back(); }
  const EncoderConfig& encoder_config() const { return encoder_; }
  std::size_t user_block() const { return user_block_; }
  std::size_t item_block() const { return item_block_; }

  // Embeddings ~ N(0, 0.1^2); encoder weights ~ N(0, 1/fan_in), zero biases.
  void initialize(ParamSet& params, Rng& rng) const;

  EmbeddingTables tables(const ParamSet& params) const;

  // Fills trace.layers[0] with x_{u,i} and runs the encoder.
  void forward(const ParamSet& params, UserIndex u, ItemIndex i,
               EncoderTrace& trace) const;
  // Encoder only, on an explicit x of length 2K.
  void encode(const ParamSet& params, std::span<const double> x,
              EncoderTrace& trace) const;
  // Accumulates d(loss)/d(W1) and d(loss)/d(e_u), d(loss)/d(e_i) given dz.
  void backward(const ParamSet& params, UserIndex u, ItemIndex i,
                const EncoderTrace& trace, std::span<const double> dz,
                GradientMap& grads) const;

 private:
  std::size_t n_users_ = 0;
  std::size_t n_items_ = 0;
  std::size_t dim_ = 0;
  EncoderConfig encoder_;
  std::size_t user_block_ = 0;
  std::size_t item_block_ = 0;
  std::vector<std::size_t> widths_;  // widths_[0] = 2K, back() = z_dim
  std::vector<std::size_t> weight_blocks_;
  std::vector<std::size_t> bias_blocks_;
};

}  // namespace counterclr
