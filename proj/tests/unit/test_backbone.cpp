#include <doctest.h>

#include "counterclr/backbone.hpp"
#include "counterclr/error.hpp"

using namespace counterclr;

namespace {

struct Fixture {
  ParamSet params;
  Backbone backbone;

  Fixture(std::size_t n_users, std::size_t n_items, std::size_t dim, EncoderConfig enc)
      : backbone(params, n_users, n_items, dim, std::move(enc)) {}
};

}  // namespace

TEST_CASE("pair embedding concatenates user then item") {
  const std::vector<double> users{1, 2};
  const std::vector<double> items{3, 4};
  const EmbeddingTables t{users, items, 2};
  CHECK(pair_embedding(t, 0, 0) == std::vector<double>{1, 2, 3, 4});
  CHECK(mf_predict(t, 0, 0) == 11.0);
  CHECK_THROWS_AS(pair_embedding(t, 1, 0), ArgumentError);
  CHECK_THROWS_AS(mf_predict(t, 0, 1), ArgumentError);
}

TEST_CASE("mf encoder output holds both halves and their product") {
  Fixture f(1, 1, 2, {});
  f.params.at("user_embedding").values = {1, 2};
  f.params.at("item_embedding").values = {3, 4};
  EncoderTrace trace;
  f.backbone.forward(f.params, 0, 0, trace);
  const auto z = trace.z();
  CHECK(std::vector<double>(z.begin(), z.end()) == std::vector<double>{1, 2, 3, 4, 3, 8});
  CHECK(f.backbone.z_dim() == 6);
}

TEST_CASE("ncf defaults: one hidden layer of width 2K, z of width K") {
  EncoderConfig enc;
  enc.mode = EncoderMode::kNcf;
  Fixture f(3, 4, 5, enc);
  CHECK(f.backbone.z_dim() == 5);
  CHECK(f.params.at("encoder.0.weight").shape == std::vector<std::size_t>{10, 10});
  CHECK(f.params.at("encoder.1.weight").shape == std::vector<std::size_t>{5, 10});
}

TEST_CASE("ncf with zero weights gives a zero z") {
  EncoderConfig enc;
  enc.mode = EncoderMode::kNcf;
  Fixture f(2, 2, 2, enc);
  auto rng = make_rng(1, Stream::kInit);
  f.backbone.initialize(f.params, rng);
  for (auto& block : f.params) {
    if (block.name.rfind("encoder.", 0) == 0) std::fill(block.values.begin(), block.values.end(), 0.0);
  }
  EncoderTrace trace;
  f.backbone.forward(f.params, 1, 1, trace);
  for (double v : trace.z()) CHECK(v == 0.0);
}

TEST_CASE("hand-set two-layer encoder matches the reference forward pass") {
  EncoderConfig enc;
  enc.mode = EncoderMode::kNcf;
  enc.hidden_dims = {2};
  enc.z_dim = 2;
  Fixture f(1, 1, 1, enc);
  f.params.at("encoder.0.weight").values = {0.3, -0.2, 0.1, 0.4};
  f.params.at("encoder.0.bias").values = {0.05, -0.1};
  f.params.at("encoder.1.weight").values = {1.0, 0.5, -0.7, 0.2};
  f.params.at("encoder.1.bias").values = {0.0, 0.3};
  const std::vector<double> x{0.5, -1.0};
  EncoderTrace trace;
  f.backbone.encode(f.params, x, trace);
  CHECK(trace.z()[0] == doctest::Approx(0.167408709511282).epsilon(1e-13));
  CHECK(trace.z()[1] == doctest::Approx(-0.050301584918463).epsilon(1e-13));
  CHECK_THROWS_AS(f.backbone.encode(f.params, std::vector<double>{1.0}, trace),
                  ArgumentError);
}

TEST_CASE("embedding gradients touch only the rows in the pair") {
  for (auto mode : {EncoderMode::kMf, EncoderMode::kNcf}) {
    EncoderConfig enc;
    enc.mode = mode;
    Fixture f(4, 5, 3, enc);
    auto rng = make_rng(2, Stream::kInit);
    f.backbone.initialize(f.params, rng);
    GradientMap grads(f.params);
    EncoderTrace trace;
    f.backbone.forward(f.params, 2, 3, trace);
    const std::vector<double> dz(f.backbone.z_dim(), 1.0);
    f.backbone.backward(f.params, 2, 3, trace, dz, grads);
    const auto gu = grads[f.backbone.user_block()];
    const auto gi = grads[f.backbone.item_block()];
    for (std::size_t u = 0; u < 4; ++u) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (u != 2) CHECK(gu[u * 3 + k] == 0.0);
      }
    }
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t k = 0; k < 3; ++k) {
        if (i != 3) CHECK(gi[i * 3 + k] == 0.0);
      }
    }
  }
}

TEST_CASE("initialization is seeded and finite") {
  Fixture a(5, 6, 4, {});
  Fixture b(5, 6, 4, {});
  auto ra = make_rng(9, Stream::kInit);
  auto rb = make_rng(9, Stream::kInit);
  a.backbone.initialize(a.params, ra);
  b.backbone.initialize(b.params, rb);
  CHECK(a.params == b.params);
  a.params.check_finite();
  double sq = 0.0;
  for (double v : a.params.at("user_embedding").values) sq += v * v;
  CHECK(sq / 20.0 < 0.05);
}

TEST_CASE("encoder mode names") {
  CHECK(parse_encoder_mode("mf") == EncoderMode::kMf);
  CHECK(to_string(EncoderMode::kNcf) == "ncf");
  CHECK_THROWS_AS(parse_encoder_mode("deep"), ArgumentError);
}

TEST_CASE("zero embedding dimension is rejected") {
  ParamSet p;
  CHECK_THROWS_AS(Backbone(p, 2, 2, 0, {}), ArgumentError);
}
