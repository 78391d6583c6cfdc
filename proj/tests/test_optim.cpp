#include <doctest.h>

#include <cmath>

#include "taas/error.hpp"
#include "taas/matrix.hpp"
#include "taas/optim.hpp"

using taas::AdamConfig;
using taas::Matrix;
using taas::Parameter;
using taas::ParameterSet;

TEST_SUITE_BEGIN("optim");

TEST_CASE("first step moves a scalar by roughly the learning rate") {
  ParameterSet params;
  Parameter& p = params.create("w", Matrix(1, 1, 1.0));
  p.gradient(0, 0) = 1.0;
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  taas::adam_step(p, cfg);
  // Bias correction makes m_hat = v_hat = 1 on step one, so the update is
  // lr / (1 + eps).
  CHECK(p.value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.step_count == 1);
  CHECK(p.gradient(0, 0) == 0.0);  // consumed
}

TEST_CASE("second step with a constant gradient stays bias-corrected") {
  ParameterSet params;
  Parameter& p = params.create("w", Matrix(1, 1, 1.0));
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  p.gradient(0, 0) = 1.0;
  taas::adam_step(p, cfg);
  p.gradient(0, 0) = 1.0;
  taas::adam_step(p, cfg);
  // With every gradient equal to 1, bias-corrected m_hat and v_hat stay 1,
  // so each step subtracts lr/(1+eps).
  CHECK(p.value(0, 0) == doctest::Approx(0.8).epsilon(1e-6));
  CHECK(p.step_count == 2);
}

TEST_CASE("zero gradient leaves the value fixed only at zero state") {
  ParameterSet params;
  Parameter& p = params.create("w", Matrix(1, 1, 2.0));
  AdamConfig cfg;
  taas::adam_step(p, cfg);  // zero gradient, zero moments: no movement
  CHECK(p.value(0, 0) == 2.0);
  CHECK(p.step_count == 1);
}

TEST_CASE("per-coordinate scaling normalizes gradient magnitude") {
  // Adam's first step is ~lr regardless of gradient scale.
  for (double scale : {1e-6, 1.0, 1e6}) {
    ParameterSet params;
    Parameter& p = params.create("w", Matrix(1, 1, 0.0));
    p.gradient(0, 0) = scale;
    AdamConfig cfg;
    cfg.learning_rate = 0.01;
    taas::adam_step(p, cfg);
    CHECK(p.value(0, 0) == doctest::Approx(-0.01).epsilon(1e-3));
  }
}

TEST_CASE("defaults match the documented optimizer settings") {
  AdamConfig cfg;
  CHECK(cfg.learning_rate == 3e-5);
  CHECK(cfg.beta1 == 0.9);
  CHECK(cfg.beta2 == 0.999);
  CHECK(cfg.epsilon == 1e-8);
}

TEST_CASE("config validation rejects out-of-range settings") {
  AdamConfig cfg;
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), taas::config_error);
  cfg = AdamConfig{};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), taas::config_error);
  cfg = AdamConfig{};
  cfg.beta2 = 1.5;
  CHECK_THROWS_AS(cfg.validate(), taas::config_error);
  cfg = AdamConfig{};
  cfg.epsilon = 0.0;
  CHECK_THROWS_AS(cfg.validate(), taas::config_error);
}

TEST_CASE("parameter set rejects duplicates and finds by name") {
  ParameterSet params;
  params.create("a", Matrix(2, 2));
  CHECK_THROWS_AS(params.create("a", Matrix(1, 1)), std::invalid_argument);
  CHECK(params.contains("a"));
  CHECK_FALSE(params.contains("b"));
  CHECK(params.at("a").value.rows == 2);
  CHECK_THROWS(params.at("b"));
}

TEST_CASE("parameter pointers survive later insertions") {
  ParameterSet params;
  Parameter* first = &params.create("p0", Matrix(3, 3, 1.0));
  for (int i = 1; i < 200; ++i)
    params.create("p" + std::to_string(i), Matrix(2, 2));
  CHECK(first == &params.at("p0"));
  CHECK(first->value(0, 0) == 1.0);
  CHECK(params.scalar_count() == 9 + 199 * 4);
}

TEST_SUITE_END();
