#include <doctest.h>

#include <cmath>
#include <limits>

#include "counterclr/adam.hpp"
#include "counterclr/error.hpp"
#include "counterclr/gradcheck.hpp"
#include "counterclr/objective.hpp"
#include "counterclr/ops.hpp"

using namespace counterclr;

namespace {

ParamSet scalar_param(double value, bool trainable = true) {
  ParamSet p;
  p.add("theta", {1}, trainable);
  p[0].values[0] = value;
  return p;
}

double adam_one_step(double g) {
  auto p = scalar_param(0.0);
  AdamState adam(p, {0.01, 0.9, 0.999, 1e-8, 0.0});
  GradientMap grads(p);
  grads[0][0] = g;
  adam.apply(p, grads);
  return p[0].values[0];
}

}  // namespace

TEST_CASE("adam first step matches the hand-evaluated recurrence") {
  CHECK(adam_one_step(0.5) == doctest::Approx(-9.999999800000003e-03).epsilon(1e-13));
  CHECK(adam_one_step(-2.0) == doctest::Approx(9.999999950000001e-03).epsilon(1e-13));
  CHECK(adam_one_step(1e-6) == doctest::Approx(-9.900990099009903e-03).epsilon(1e-13));
}

TEST_CASE("adam with a constant gradient follows the closed form") {
  auto p = scalar_param(1.0);
  AdamState adam(p, {0.01, 0.9, 0.999, 1e-8, 0.0});
  GradientMap grads(p);
  for (int n = 0; n < 1000; ++n) {
    grads.zero();
    grads[0][0] = 0.3;
    adam.apply(p, grads);
  }
  CHECK(adam.step() == 1000);
  CHECK(p[0].values[0] == doctest::Approx(-8.999999666666584).epsilon(1e-12));
}

TEST_CASE("adam leaves non-trainable blocks alone and applies weight decay") {
  ParamSet p;
  p.add("w", {2});
  p.add("frozen", {2}, false);
  p[0].values = {1.0, -1.0};
  p[1].values = {3.0, 4.0};
  AdamState adam(p, {0.01, 0.9, 0.999, 1e-8, 0.1});
  GradientMap grads(p);
  CHECK_FALSE(grads.has(1));
  adam.apply(p, grads);
  // Gradient is zero, so the decay term alone moves each weight toward 0.
  CHECK(p[0].values[0] < 1.0);
  CHECK(p[0].values[1] > -1.0);
  CHECK(p[1].values == std::vector<double>{3.0, 4.0});
}

TEST_CASE("stable sigmoid, softplus and softmax cross-entropy") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(softplus(1000.0) == doctest::Approx(1000.0));
  CHECK(softplus(-1000.0) >= 0.0);
  CHECK(std::isfinite(softplus(-1000.0)));
  const std::vector<double> logits{1.0, 0.0};
  std::vector<double> d(2);
  CHECK(softmax_cross_entropy(logits, 0, d) ==
        doctest::Approx(0.313261687518223).epsilon(1e-14));
  CHECK(d[0] + d[1] == doctest::Approx(0.0));
  CHECK(d[0] < 0.0);
}

TEST_CASE("finite-difference check on a quadratic") {
  auto p = scalar_param(0.7);
  p.add("b", {2});
  p[1].values = {0.5, -1.5};
  const LossFunction loss = [](const ParamSet& q) {
    return q[0].values[0] * q[0].values[0] * q[1].values[0] + std::sin(q[1].values[1]);
  };
  GradientMap g(p);
  g[0][0] = 2.0 * 0.7 * 0.5;
  g[1][0] = 0.7 * 0.7;
  g[1][1] = std::cos(-1.5);
  const auto ok = finite_difference_check(p, loss, g, 1e-5, 1e-6);
  CHECK(ok.passed);
  CHECK(ok.first_failure().empty());

  g[1][1] = -g[1][1];
  const auto bad = finite_difference_check(p, loss, g, 1e-5, 1e-6);
  CHECK_FALSE(bad.passed);
  CHECK(bad.first_failure() == "b");
}

TEST_CASE("finite-difference step must be positive") {
  auto p = scalar_param(1.0);
  GradientMap g(p);
  const LossFunction loss = [](const ParamSet&) { return 0.0; };
  CHECK_THROWS_AS(finite_difference_check(p, loss, g, 0.0, 1e-4), ArgumentError);
  CHECK_THROWS_AS(finite_difference_check(p, loss, g, -1e-5, 1e-4), ArgumentError);
}

TEST_CASE("gradient map flags non-finite entries by term") {
  auto p = scalar_param(1.0);
  GradientMap g(p);
  g[0][0] = std::numeric_limits<double>::quiet_NaN();
  try {
    g.check_finite("L_con");
    FAIL("expected a numerical error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("L_con") != std::string::npos);
  }
}

TEST_CASE("full objective gradients match finite differences") {
  LossSpec spec;
  spec.alpha = 1.0;
  spec.beta = 1.0;
  spec.temperature = 0.07;
  spec.tau = 1.0;
  for (auto mode : {EncoderMode::kMf, EncoderMode::kNcf}) {
    EncoderConfig enc;
    enc.mode = mode;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto inst = random_gradcheck_instance(seed, 5, 6, 3, enc);
      const ObservationIndex index(inst.train);
      const auto report =
          check_objective_gradients(inst.net, index, inst.batch, spec, 1e-5, 1e-4);
      CHECK_MESSAGE(report.passed, "mode " << to_string(mode) << " seed " << seed
                                           << " failing block " << report.first_failure());
    }
  }
}

TEST_CASE("each loss term alone passes the gradient check") {
  EncoderConfig enc;
  enc.mode = EncoderMode::kNcf;
  const auto inst = random_gradcheck_instance(3, 5, 6, 3, enc);
  const ObservationIndex index(inst.train);
  for (auto [alpha, beta] : {std::pair{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}) {
    LossSpec spec;
    spec.alpha = alpha;
    spec.beta = beta;
    CHECK(check_objective_gradients(inst.net, index, inst.batch, spec, 1e-5, 1e-4).passed);
  }
}

TEST_CASE("gradient through the propensity divisor when stop-gradient is off") {
  EncoderConfig enc;
  const auto inst = random_gradcheck_instance(8, 5, 6, 3, enc);
  const ObservationIndex index(inst.train);
  LossSpec spec;
  spec.stop_gradient_propensity = false;
  CHECK(check_objective_gradients(inst.net, index, inst.batch, spec, 1e-5, 1e-4).passed);
}

TEST_CASE("a sign-flipped block is reported") {
  EncoderConfig enc;
  const auto inst = random_gradcheck_instance(2, 5, 6, 3, enc);
  const ObservationIndex index(inst.train);
  const auto report = check_objective_gradients(
      inst.net, index, inst.batch, LossSpec{}, 1e-5, 1e-4, [](GradientMap& g) {
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (g.name(k) == "exposure_head.weight") {
            for (auto& v : g[k]) v = -v;
          }
        }
      });
  CHECK_FALSE(report.passed);
  CHECK(report.first_failure() == "exposure_head.weight");
}
