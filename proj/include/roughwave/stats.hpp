#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "roughwave/errors.hpp"
#include "roughwave/noise.hpp"
#include "roughwave/solver.hpp"

namespace roughwave::stats {

// Integral of u(t, x) - 1 over [-R, R]: each site of the level carries the
// cell [x - delta, x + delta], clipped to [-R, R].
double spatial_average(const solver::Field& field, const noise::Lattice& lattice, double R);

// Same with an arbitrary integrand g(u) in place of u - 1.
template <class G>
double spatial_integral(const solver::Field& field, const noise::Lattice& lattice, double R, G&& g);

struct FValue {
  double R = 0.0;
  double t = 0.0;
  double F = 0.0;
};

struct ErgodicValue {
  double R = 0.0;
  double t = 0.0;
  double U = 0.0;
};

// Site samples u(t, x_j) for j_first, j_first + 2, ...
struct SiteSample {
  double t = 0.0;
  int j_first = 0;
  std::vector<double> values;
};

struct ReplicaResult {
  std::uint64_t replica = 0;
  std::uint64_t seed = 0;  // stream seed of level 0
  std::vector<FValue> F;
  std::vector<SiteSample> sites;
  std::vector<ErgodicValue> U;

  double F_at(double R, double t) const;  // throws when absent
};

// Sample of F_R(t) across replicas in replica order.
std::vector<double> collect_F(const std::vector<ReplicaResult>& rs, double R, double t);

struct Moments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
};
Moments moments(const std::vector<double>& xs);

struct LinearFit {
  double slope = 0.0, intercept = 0.0;
  double slope_se = 0.0, intercept_se = 0.0;
};
LinearFit ols(const std::vector<double>& x, const std::vector<double>& y);

double normal_cdf(double x);
// sqrt(n) D -> Kolmogorov distribution; returns P(K > lambda).
double kolmogorov_sf(double lambda);

// One-sample KS distance of the standardized sample against N(0, 1).
double ks_normal(const std::vector<double>& xs, bool standardize = true);

struct TwoSampleKs {
  double D = 0.0;
  double p_value = 1.0;
  double critical_1pct = 0.0;  // 1.628 sqrt((n + m)/(n m))
  bool accept = true;          // D below the 1% critical value
};
TwoSampleKs ks_two_sample(std::vector<double> a, std::vector<double> b);

struct RSummary {
  double R = 0.0, t = 0.0;
  std::size_t M = 0;
  double mean = 0.0, var = 0.0, var_over_R = 0.0;
  double ks = 0.0, skewness = 0.0, excess_kurtosis = 0.0;
};
RSummary summarize(const std::vector<ReplicaResult>& rs, double R, double t);

struct VarianceScan {
  double t = 0.0;
  std::vector<RSummary> rows;
  LinearFit fit;  // log var against log R
};
VarianceScan variance_scan(const std::vector<ReplicaResult>& rs, const std::vector<double>& R_list, double t,
                           std::size_t min_replicas = 500);

struct NormalityProfile {
  double t = 0.0;
  std::vector<RSummary> rows;
  LinearFit fit;  // log KS against log R
};
NormalityProfile normality_profile(const std::vector<ReplicaResult>& rs, const std::vector<double>& R_list, double t,
                                   std::size_t min_replicas = 1000);

struct ErgodicTestFunction {
  std::vector<double> b{1.0};
  std::vector<double> zeta{0.0};  // shifts in x
};

// U_R = sum over sites in [-R, R] of cos(sum_j b_j u(t, x + zeta_j)) * cell width.
double ergodic_functional(const solver::Field& field, const noise::Lattice& lattice, double R,
                          const ErgodicTestFunction& tf);

struct ErgodicRow {
  double R = 0.0;
  double var_U = 0.0, var_U_over_R = 0.0, var_U_over_R2 = 0.0;
  double mean_F_over_R = 0.0, se_F_over_R = 0.0, rms_F_over_R = 0.0;
};

struct ErgodicReport {
  double t = 0.0;
  std::vector<ErgodicRow> rows;
  LinearFit growth;                // log(Var U_R / R) against log R
  double growth_threshold = 0.2;   // bounded when slope < threshold
  bool var_bounded = false;
  bool lln_ok = false;             // |mean F_R/R| < 4 se at the largest R
  std::vector<TwoSampleKs> stationarity;
  std::vector<std::pair<double, double>> site_pairs;
  bool stationary = false;
};

ErgodicReport ergodic_probe(const std::vector<ReplicaResult>& rs, const std::vector<double>& R_list, double t,
                            const std::vector<std::pair<double, double>>& site_pairs, double delta);

struct IncrementRatio {
  double R = 0.0;
  std::vector<std::pair<double, double>> pairs;
  std::vector<double> ratios;  // ||F_R(t) - F_R(s)||_2 / sqrt(R (t - s))
  double spread = 0.0;         // max / min
};
IncrementRatio increment_ratio(const std::vector<ReplicaResult>& rs, const std::vector<std::pair<double, double>>& st,
                               double R);

struct ConjectureReport {
  double t = 0.0, x_max = 0.0;
  std::vector<double> lags;        // x values
  std::vector<double> covariance;  // pooled empirical covariance at each lag
  double lhs = 0.0, lhs_se = 0.0;  // 2 * trapezoid integral over [-x_max, x_max]
  double rhs = 0.0, rhs_error = 0.0;
};
ConjectureReport conjecture_probe(const std::vector<ReplicaResult>& rs, double t, double x_max, double delta);

// CSV payloads.
std::string replica_csv(const std::vector<ReplicaResult>& rs);
std::string summary_csv(const std::vector<RSummary>& rows, const LinearFit* fit, const std::string& fit_name);

template <class G>
double spatial_integral(const solver::Field& field, const noise::Lattice& lattice, double R, G&& g) {
  const double d = lattice.delta;
  if (!(R > 0.0)) return 0.0;
  double lo = lattice.x(field.j_first) - d;
  double hi = lattice.x(field.j_last()) + d;
  if (field.values.empty() || lo > -R + 1e-12 * d || hi < R - 1e-12 * d) {
    throw ValidationError("[-R, R] exceeds the exact region of the level (R = " + std::to_string(R) + ")");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    double x = lattice.x(field.j_first + 2 * static_cast<int>(i));
    double a = std::max(x - d, -R);
    double b = std::min(x + d, R);
    if (b > a) total += (b - a) * g(field.values[i]);
  }
  return total;
}

}  // namespace roughwave::stats
