#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "roughwave/chaos.hpp"
#include "roughwave/errors.hpp"

using namespace roughwave;
using namespace roughwave::chaos;

namespace {
const HurstParams P = frachilbert::make_params(0.35);
constexpr double kPi = std::numbers::pi;

double closed_C(double a) {
  // 2^{1-a} Gamma(a) sin(pi a / 2) / (1 - a), continued to a = 0 as pi.
  if (a == 0.0) return kPi;
  return std::pow(2.0, 1.0 - a) * std::tgamma(a) * std::sin(kPi * a / 2.0) / (1.0 - a);
}
}  // namespace

TEST(SinInt, ConstantsAndScaling) {
  EXPECT_NEAR(sin_int(0.0, 2.0), 2.0 * kPi, 1e-10);
  for (double a : {-0.5, 0.0, 0.3, 0.7}) {
    EXPECT_NEAR(sin_int_constant(a).value, closed_C(a), 1e-9 * closed_C(a)) << a;
    for (double t : {0.5, 2.0, 4.0}) {
      EXPECT_NEAR(sin_int(a, t) / sin_int(a, 1.0), std::pow(t, 1.0 - a), 1e-8 * std::pow(t, 1.0 - a));
    }
  }
  EXPECT_NEAR(sin_int_constant(0.3).value, 3.15187324899639, 1e-10);
  EXPECT_THROW(sin_int(1.0, 1.0), ValidationError);
}

TEST(BetaInt, ExamplesAndErrors) {
  EXPECT_NEAR(beta_int({0.0}, 3.0), 3.0, 1e-14);
  EXPECT_NEAR(beta_int({1.0, 1.0}, 1.0), 1.0 / 24.0, 1e-15);
  EXPECT_NEAR(beta_int({0.5, -0.5}, 1.0), kPi / 4.0, 1e-14);
  EXPECT_THROW(beta_int({-1.0}, 1.0), ValidationError);
}

TEST(Kappa, Conventions) {
  EXPECT_EQ(kappa(P, KappaConvention::spectral), P.c_spectral());
  EXPECT_EQ(kappa(P, KappaConvention::gagliardo), P.c_gagliardo());
  EXPECT_EQ(parse_kappa("c_H"), KappaConvention::spectral);
  EXPECT_EQ(parse_kappa("C_H"), KappaConvention::gagliardo);
  EXPECT_STREQ(to_string(KappaConvention::spectral), "c_H");
}

TEST(Gamma1, ClosedFormAtOrigin) {
  auto g = gamma_n(1, 1.0, 0.0, P);
  double closed = P.c_spectral() * sin_int_constant(0.3).value / 1.7;
  EXPECT_NEAR(g.value, closed, 1e-6 * closed);
  EXPECT_NEAR(g.value, 0.238897763634, 1e-10);
  EXPECT_NEAR(gamma1_closed(1.0, 0.0, P), g.value, 1e-10);
}

TEST(Gamma1, FrequencyAndPhysicalRoutesAgree) {
  for (double x : {0.3, 1.0, 1.7, 2.5, 4.0}) {
    double a = gamma_n(1, 1.0, x, P).value;
    double b = gamma1_closed(1.0, x, P);
    EXPECT_NEAR(a, b, 1e-4 * std::max(std::abs(b), 1e-3)) << x;
    EXPECT_NEAR(gamma_n(1, 1.0, -x, P).value, a, 1e-9);
  }
}

TEST(Gamma1, DecaysInX) {
  double prev = std::abs(gamma1_closed(1.0, 4.0, P));
  for (double x : {8.0, 16.0, 32.0, 64.0}) {
    double v = std::abs(gamma1_closed(1.0, x, P));
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Gamma2, OriginValueAndAlternateRoute) {
  auto g = gamma_n(2, 1.0, 0.0, P);
  EXPECT_GT(g.value, 0.0);
  EXPECT_LT(g.error, 0.01 * g.value);
  EXPECT_NEAR(g.value / 2.0, 0.0202975912, 2e-8);
  auto alt = rho2_alternate(1.0, P);
  EXPECT_NEAR(alt.value, g.value / 2.0, 1e-6 * alt.value);
  EXPECT_THROW(gamma_n(3, 1.0, 0.0, P), ValidationError);
}

TEST(RhoTrunc, SeriesStructure) {
  auto r = rho_trunc(0.5, 0.0, P, 2);
  ASSERT_EQ(r.terms.size(), 2u);
  EXPECT_NEAR(r.terms[0].value, 0.073529412, 1e-8);
  EXPECT_NEAR(r.terms[1].value, 0.0019228372, 1e-9);
  EXPECT_NEAR(r.partial_sum, r.terms[0].value + r.terms[1].value, 1e-15);
  EXPECT_GE(r.tail_estimate, 0.0);
  EXPECT_FALSE(r.tail_method.empty());
  EXPECT_THROW(rho_trunc(0.5, 1.0, P, 3), ValidationError);
}

TEST(K2, ClosedFormScalingAndDirectRoute) {
  double k1 = K2_closed(1.0, P);
  EXPECT_NEAR(k1, 0.03299240161, 1e-10);
  EXPECT_NEAR(K2_closed(2.0, P) / k1, std::pow(2.0, 4 * 0.35 + 3), 1e-10 * std::pow(2.0, 4.4));
  EXPECT_NEAR(K2_direct(1.0, P).value, k1, 1e-4 * k1);
  for (double H : {0.26, 0.3, 0.4, 0.49}) EXPECT_GT(K2_closed(0.7, frachilbert::make_params(H)), 0.0);
}

TEST(KTrunc, SingleTermIsClosedForm) {
  for (double t : {0.25, 0.5, 1.0}) {
    auto K = K_trunc(t, P, 2);
    EXPECT_NEAR(K.partial_sum, K2_closed(t, P), 1e-10 * K.partial_sum);
  }
  EXPECT_THROW(K_trunc(1.0, P, 1), ValidationError);
}

TEST(K3, FrozenValue) {
  auto k = K3(1.0, P);
  EXPECT_NEAR(k.value, 0.0008124052874, 1e-8);
  EXPECT_GT(k.value, 0.0);
}

TEST(Gamma1Window, VanishesRelativeToR) {
  double prev = 1e300;
  for (double R : {10.0, 20.0, 40.0, 80.0}) {
    double v = gamma1_window(1.0, R, P).value / R;
    EXPECT_LT(std::abs(v), prev);
    prev = std::abs(v);
  }
}

TEST(Tables, CsvHeader) {
  auto rows = chaos_table(P, {0.5}, {0.0, 1.0}, 1, KappaConvention::spectral);
  ASSERT_EQ(rows.size(), 2u);
  auto csv = table_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "H,t,x,n,value,error_estimate,kappa_convention");
}
