#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "counterclr/backbone.hpp"
#include "counterclr/data.hpp"
#include "counterclr/params.hpp"
#include "counterclr/training.hpp"

namespace counterclr {

// Plain matrix factorization, r = e_u^T e_i.
class MfModel {
 public:
  MfModel() = default;
  MfModel(std::size_t n_users, std::size_t n_items, std::size_t dim);

  void initialize(std::uint64_t seed);
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const Backbone& backbone() const { return backbone_; }
  EmbeddingTables tables() const { return backbone_.tables(params_); }

  double predict(UserIndex u, ItemIndex i) const;
  double predict(const ParamSet& params, UserIndex u, ItemIndex i) const;
  // Accumulates d_r * d(r)/d(embeddings).
  void backward(const ParamSet& params, UserIndex u, ItemIndex i, double d_r,
                GradientMap& grads) const;

 private:
  ParamSet params_;
  Backbone backbone_;
};

// Mean of the errors over the batch.
double naive_loss(std::span<const double> errors);
// sum_k e_k / p_k / population_size.
double ips_loss(std::span<const double> errors,
                std::span<const double> propensities, double population_size);
// (sum_k e_k / p_k) / (sum_k 1 / p_k).
double snips_loss(std::span<const double> errors,
                  std::span<const double> propensities);

struct DrTerm {
  double imputed_error = 0.0;
  bool observed = false;
  double error = 0.0;  // used only when observed
  double propensity = 1.0;
};
// (1/population_size) sum [e_hat + o (e - e_hat) / p].
double dr_loss(std::span<const DrTerm> terms, double population_size);

// Logistic regression P(o = 1 | u, i) on frozen pair embeddings plus user and
// item biases; outputs are clipped to [clip, 1).
class PropensityModel {
 public:
  PropensityModel() = default;
  PropensityModel(const EmbeddingTables& features, double clip);

  // BCE with one uniformly drawn unobserved pair per observed pair, followed
  // by a prior correction of the intercept for the 1:1 sampling ratio.
  void fit(const InteractionDataset& train, std::size_t epochs,
           std::size_t batch_size, double learning_rate, std::uint64_t seed);

  double logit(UserIndex u, ItemIndex i) const;
  double predict(UserIndex u, ItemIndex i) const;
  double clip() const { return clip_; }
  const ParamSet& params() const { return params_; }

 private:
  std::vector<double> features_user_;
  std::vector<double> features_item_;
  std::size_t dim_ = 0;
  double clip_ = 0.05;
  ParamSet params_;
};

enum class BaselineMethod { kNaive, kIps, kSnips, kDr };

std::string to_string(BaselineMethod m);

struct TrainedMf {
  MfModel model;
  TrainReport report;
};

// Trains an MF predictor with the chosen estimator as its loss; IPS, SNIPS
// and DR first fit a naive MF model whose embeddings feed the propensity
// model.
TrainedMf train_baseline(BaselineMethod method, const InteractionDataset& train,
                         const InteractionDataset& validation,
                         const TrainConfig& config);

}  // namespace counterclr
