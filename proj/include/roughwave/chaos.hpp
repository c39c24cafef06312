#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "roughwave/frachilbert.hpp"
#include "roughwave/quadrature.hpp"

namespace roughwave::chaos {

using frachilbert::HurstParams;

// Which constant multiplies each noise factor in the series: the spectral
// c_H (default) or the Gagliardo C_H.
enum class KappaConvention { spectral, gagliardo };

const char* to_string(KappaConvention k);
KappaConvention parse_kappa(const std::string& s);  // "c_H"/"spectral" or "C_H"/"gagliardo"
double kappa(const HurstParams& p, KappaConvention k);

struct ChaosTerm {
  int order = 1;
  double t = 0.0;
  double x = 0.0;
  double value = 0.0;
  double error = 0.0;
  KappaConvention convention = KappaConvention::spectral;
};

struct SeriesResult {
  double partial_sum = 0.0;
  double quadrature_error = 0.0;
  std::vector<ChaosTerm> terms;  // summands as added (gamma_n / n! for rho, K_n for K)
  std::string tail_method;
  double tail_estimate = 0.0;
};

// C_alpha = integral over R of sin^2(xi)/xi^2 |xi|^alpha; cached per alpha.
quad::Estimate sin_int_constant(double alpha);
// integral of sin^2(t|xi|)/|xi|^2 |xi|^alpha = C_alpha t^{1-alpha}.
double sin_int(double alpha, double t);

// Integral over the simplex 0 < t_1 < ... < t_n < t of prod (t_{j+1} - t_j)^{alpha_j},
// with t_{n+1} = t.
double beta_int(const std::vector<double>& alphas, double t);

struct ChaosOptions {
  KappaConvention convention = KappaConvention::spectral;
  bool allow_order3 = false;  // gamma_3 at x = 0 only; a 3-D quadrature
};

ChaosTerm gamma_n(int n, double t, double x, const HurstParams& p, const ChaosOptions& opt = {});

// gamma_1 from the physical-space kernel (exact antiderivatives).
double gamma1_closed(double t, double x, const HurstParams& p, KappaConvention k = KappaConvention::spectral);

// Sum of gamma_n(t, x)/n! for n = 1..n_max (n_max <= 3; 3 requires x = 0).
SeriesResult rho_trunc(double t, double x, const HurstParams& p, int n_max,
                       KappaConvention k = KappaConvention::spectral);

// rho_2 = gamma_2/2 at x = 0 by the alternative ordering of the frequency
// integrals; used as an independent check.
quad::Estimate rho2_alternate(double t, const HurstParams& p, KappaConvention k = KappaConvention::spectral);

// The n = 2 summand of K(t):
//   4 pi kappa^2 C_{2-4H} * 2 t^{4H+3} / (4H (4H+1) (4H+2) (4H+3)).
double K2_closed(double t, const HurstParams& p, KappaConvention k = KappaConvention::spectral);
// Same quantity by nested quadrature over (t_1, t_2, eta) without the scaling law.
quad::Estimate K2_direct(double t, const HurstParams& p, KappaConvention k = KappaConvention::spectral);
quad::Estimate K3(double t, const HurstParams& p, KappaConvention k = KappaConvention::spectral);

SeriesResult K_trunc(double t, const HurstParams& p, int n_max = 2, KappaConvention k = KappaConvention::spectral);

// Integral over [-R, R]^2 of gamma_1(t, x - y): the n = 1 part of Var(F_R(t)).
quad::Estimate gamma1_window(double t, double R, const HurstParams& p,
                             KappaConvention k = KappaConvention::spectral);

struct TableRow {
  double H, t, x;
  int n;
  double value, error;
  KappaConvention convention;
};

std::vector<TableRow> chaos_table(const HurstParams& p, const std::vector<double>& ts, const std::vector<double>& xs,
                                  int n_max, KappaConvention k);
std::string table_csv(const std::vector<TableRow>& rows);

}  // namespace roughwave::chaos
