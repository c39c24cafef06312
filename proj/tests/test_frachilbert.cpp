#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "roughwave/errors.hpp"
#include "roughwave/frachilbert.hpp"

using namespace roughwave;
using namespace roughwave::frachilbert;

namespace {
const HurstParams P = make_params(0.35);
}

TEST(HurstParams, RejectsOutsideQuarterHalf) {
  EXPECT_THROW(make_params(0.6), ValidationError);
  EXPECT_THROW(make_params(0.25), ValidationError);
  EXPECT_THROW(make_params(0.5), ValidationError);
  EXPECT_NO_THROW(make_params(0.3));
  try {
    make_params(0.6);
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(1/4, 1/2)"), std::string::npos);
  }
}

TEST(HurstParams, Constants) {
  EXPECT_NEAR(P.c_spectral(), 0.128852325615389, 1e-14);
  EXPECT_NEAR(P.c_gagliardo(), 0.0525, 1e-15);
  EXPECT_DOUBLE_EQ(P.beta(), 0.3);
  // c_H = Gamma(2H+1) sin(pi H) / (2 pi) at H = 1/4
  auto q = HurstParams::reference(0.25);
  EXPECT_NEAR(q.c_spectral(), std::tgamma(1.5) * std::sin(std::numbers::pi / 4) / (2 * std::numbers::pi), 1e-15);
}

TEST(Covariance, IncrementBasics) {
  EXPECT_NEAR(increment_cov(0.0, 1.5, 0.0, 1.5, P), std::pow(1.5, 0.7), 1e-14);
  EXPECT_NEAR(rh_cov(2.0, 2.0, P), std::pow(2.0, 0.7), 1e-14);
  EXPECT_LT(increment_cov(0.0, 1.0, 2.0, 3.0, P), 0.0);  // negatively correlated increments
  auto brown = HurstParams::reference(0.5);
  EXPECT_NEAR(increment_cov(0.0, 1.0, 2.0, 3.0, brown), 0.0, 1e-15);
  EXPECT_NEAR(increment_cov(0.0, 2.0, 1.0, 3.0, brown), 1.0, 1e-15);
  EXPECT_THROW(increment_cov(1.0, 0.0, 0.0, 1.0, P), ValidationError);
}

TEST(Covariance, PowerIntegrals) {
  EXPECT_NEAR(power_antiderivative(-2.0, 0.7), -std::pow(2.0, 1.7) / 1.7, 1e-14);
  // integral of |w|^{0.7} over [-1, 2]
  double v = linear_power_integral(-1.0, 1.0, 3.0, 0.7);
  EXPECT_NEAR(v, (std::pow(2.0, 1.7) + 1.0) / 1.7, 1e-13);
  EXPECT_NEAR(linear_power_integral(2.0, -1.0, 3.0, 0.7), v, 1e-13);
}

TEST(Forms, IndicatorNormIsIntervalPower) {
  auto f = SampledFunction::indicator(0.0, 1.5, 0.25);
  double expect = std::pow(1.5, 0.7);
  EXPECT_NEAR(increment_cov_expansion(f, f, P), expect, 1e-12);
  EXPECT_NEAR(gagliardo_form(f, f, P), expect, 1e-9 * expect);
  auto s = spectral_form(f, f, P);
  EXPECT_NEAR(s.value, expect, 1e-6 * expect);
  EXPECT_GE(s.error, 0.0);
}

TEST(Forms, ThreeRoutesAgreeOnRandomSteps) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    SampledFunction f, g;
    f.spacing = 0.2;
    g.spacing = 0.4;
    f.origin = -0.6;
    g.origin = 0.4 * trial - 2.0;
    f.values.resize(9);
    g.values.resize(5);
    for (auto& v : f.values) v = U(rng);
    for (auto& v : g.values) v = U(rng);
    double a = increment_cov_expansion(f, g, P);
    double scale = std::sqrt(increment_cov_expansion(f, f, P) * increment_cov_expansion(g, g, P));
    EXPECT_NEAR(gagliardo_form(f, g, P), a, 1e-8 * scale);
    EXPECT_NEAR(spectral_form(f, g, P).value, a, 1e-5 * scale);
  }
}

TEST(Forms, ShiftInvarianceAndSymmetry) {
  auto f = SampledFunction::indicator(0.0, 1.0, 0.5);
  auto g = SampledFunction::indicator(1.5, 2.0, 0.5);
  double fg = gagliardo_form(f, g, P);
  EXPECT_NEAR(gagliardo_form(g, f, P), fg, 1e-14);
  EXPECT_NEAR(gagliardo_form(f.shifted(3.0), g.shifted(3.0), P), fg, 1e-12);
  EXPECT_LT(fg, 0.0);
}

TEST(Forms, GagliardoNeedsRoughNoise) {
  auto f = SampledFunction::indicator(0.0, 1.0, 0.5);
  EXPECT_THROW(gagliardo_form(f, f, HurstParams::reference(0.6)), ValidationError);
}

TEST(SampledFunction, Validation) {
  SampledFunction f;
  f.spacing = 0.0;
  f.values = {1.0};
  EXPECT_THROW(f.validate(), ValidationError);
  f.spacing = 0.1;
  f.values = {std::nan("")};
  EXPECT_THROW(f.validate(), ValidationError);
}
