#pragma once

#include <vector>

#include "roughwave/quadrature.hpp"

namespace roughwave::frachilbert {

// Hurst index of the spatial noise. Derived constants are recomputed from H
// on every call.
class HurstParams {
 public:
  // Unchecked constructor for H in (0, 1), used for Brownian (H = 1/2)
  // reference checks. Production code goes through make_params.
  static HurstParams reference(double H);

  double H() const { return H_; }
  double two_h() const { return 2.0 * H_; }
  double beta() const { return 1.0 - 2.0 * H_; }  // spectral exponent 1 - 2H
  double c_spectral() const;                      // c_H = Gamma(2H+1) sin(pi H) / (2 pi)
  double c_gagliardo() const;                     // C_H = H (1 - 2H) / 2

 private:
  explicit HurstParams(double H) : H_(H) {}
  double H_;
};

// Rejects H outside the open interval (1/4, 1/2).
HurstParams make_params(double H);

// Piecewise constant function: values[i] on [origin + i*spacing, origin + (i+1)*spacing),
// zero outside [lower(), upper()).
struct SampledFunction {
  double origin = 0.0;
  double spacing = 1.0;
  std::vector<double> values;

  double lower() const { return origin; }
  double upper() const { return origin + spacing * static_cast<double>(values.size()); }
  void validate() const;

  static SampledFunction indicator(double a, double b, double spacing);
  SampledFunction shifted(double a) const;
};

double rh_cov(double x, double y, const HurstParams& p);

// E[(B_b - B_a)(B_d - B_c)] for fractional Brownian motion.
double increment_cov(double a, double b, double c, double d, const HurstParams& p);

// Sum over cell pairs of f_i g_j increment_cov(cell_i, cell_j).
double increment_cov_expansion(const SampledFunction& f, const SampledFunction& g,
                               const HurstParams& p);

// C_H * double integral of (f(x)-f(y))(g(x)-g(y))|x-y|^{2H-2}, with exact cell-pair
// integrals. Requires H < 1/2.
double gagliardo_form(const SampledFunction& f, const SampledFunction& g, const HurstParams& p);

// c_H * integral of F f conj(F g) |xi|^{1-2H}; error carries the aliasing-tail bound.
quad::Estimate spectral_form(const SampledFunction& f, const SampledFunction& g,
                             const HurstParams& p);

// sign(z)|z|^{2H+1}/(2H+1), the antiderivative of |z|^{2H}.
double power_antiderivative(double z, double two_h);

// Integral over w in [0, len] of |a + slope*w|^{2H}, slope = +-1 (or any nonzero).
double linear_power_integral(double a, double slope, double len, double two_h);

}  // namespace roughwave::frachilbert
