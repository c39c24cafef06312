#include "roughwave/frachilbert.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "fftw_guard.hpp"
#include "roughwave/errors.hpp"

namespace roughwave::frachilbert {

namespace {

constexpr double kPi = std::numbers::pi;

struct Aligned {
  double spacing = 1.0;
  std::vector<double> f;
  std::vector<double> g;
};

std::vector<double> refine_onto(const SampledFunction& s, double h, double origin, std::size_t n) {
  std::vector<double> out(n, 0.0);
  if (s.values.empty()) return out;
  double ratio = s.spacing / h;
  long r = std::lround(ratio);
  if (r < 1 || std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio) {
    throw ValidationError("sampled functions are not on commensurate grids (spacing ratio " +
                          std::to_string(ratio) + ")");
  }
  double off = (s.origin - origin) / h;
  long o = std::lround(off);
  if (std::abs(off - static_cast<double>(o)) > 1e-9 * std::max(1.0, std::abs(off))) {
    throw ValidationError("sampled functions are not on commensurate grids (origin offset)");
  }
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    for (long k = 0; k < r; ++k) {
      out[static_cast<std::size_t>(o + static_cast<long>(i) * r + k)] = s.values[i];
    }
  }
  return out;
}

Aligned align(const SampledFunction& f, const SampledFunction& g) {
  f.validate();
  g.validate();
  Aligned a;
  bool fe = f.values.empty();
  bool ge = g.values.empty();
  if (fe && ge) return a;
  double h = fe ? g.spacing : (ge ? f.spacing : std::min(f.spacing, g.spacing));
  double lo = fe ? g.lower() : (ge ? f.lower() : std::min(f.lower(), g.lower()));
  double hi = fe ? g.upper() : (ge ? f.upper() : std::max(f.upper(), g.upper()));
  auto n = static_cast<std::size_t>(std::llround((hi - lo) / h));
  a.spacing = h;
  a.f = refine_onto(f, h, lo, n);
  a.g = refine_onto(g, h, lo, n);
  return a;
}

// Second difference (m+1)^p - 2 m^p + (m-1)^p, with a binomial series for
// large m where direct evaluation cancels.
double second_difference(double m, double p) {
  if (m < 40.0) return std::pow(m + 1.0, p) - 2.0 * std::pow(m, p) + std::pow(m - 1.0, p);
  double sum = 0.0;
  double binom = 1.0;  // binom(p, k)
  double inv = 1.0 / m;
  double pw = 1.0;
  for (int k = 1; k <= 24; ++k) {
    binom *= (p - (k - 1)) / k;
    pw *= inv;
    if (k % 2 == 0) {
      double term = 2.0 * binom * pw;
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
  }
  return std::pow(m, p) * sum;
}

}  // namespace

HurstParams HurstParams::reference(double H) {
  if (!(H > 0.0 && H < 1.0)) throw ValidationError("Hurst index must lie in (0, 1)");
  return HurstParams(H);
}

double HurstParams::c_spectral() const { return std::tgamma(2.0 * H_ + 1.0) * std::sin(kPi * H_) / (2.0 * kPi); }

double HurstParams::c_gagliardo() const { return H_ * (1.0 - 2.0 * H_) / 2.0; }

HurstParams make_params(double H) {
  if (!(H > 0.25 && H < 0.5)) {
    std::ostringstream msg;
    msg << "Hurst index H = " << H << " is outside the admissible open interval (1/4, 1/2)";
    throw ValidationError(msg.str());
  }
  return HurstParams::reference(H);
}

void SampledFunction::validate() const {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw ValidationError("grid spacing must be positive and finite");
  if (!std::isfinite(origin) || !std::isfinite(upper())) throw ValidationError("support must be bounded");
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("sampled values must be finite");
  }
}

SampledFunction SampledFunction::indicator(double a, double b, double spacing) {
  if (!(b >= a)) throw ValidationError("indicator requires a <= b");
  SampledFunction f;
  f.origin = a;
  f.spacing = spacing;
  double cells = (b - a) / spacing;
  long n = std::lround(cells);
  if (std::abs(cells - static_cast<double>(n)) > 1e-9 * std::max(1.0, cells)) {
    throw ValidationError("indicator length is not a multiple of the spacing");
  }
  f.values.assign(static_cast<std::size_t>(n), 1.0);
  return f;
}

SampledFunction SampledFunction::shifted(double a) const {
  SampledFunction s = *this;
  s.origin += a;
  return s;
}

double rh_cov(double x, double y, const HurstParams& p) {
  double e = p.two_h();
  return 0.5 * (std::pow(std::abs(x), e) + std::pow(std::abs(y), e) - std::pow(std::abs(x - y), e));
}

double increment_cov(double a, double b, double c, double d, const HurstParams& p) {
  if (a > b || c > d) throw ValidationError("increment_cov requires a <= b and c <= d");
  double e = p.two_h();
  return 0.5 * (std::pow(std::abs(b - c), e) + std::pow(std::abs(a - d), e) - std::pow(std::abs(a - c), e) -
                std::pow(std::abs(b - d), e));
}

double increment_cov_expansion(const SampledFunction& f, const SampledFunction& g, const HurstParams& p) {
  f.validate();
  g.validate();
  double sum = 0.0;
  for (std::size_t i = 0; i < f.values.size(); ++i) {
    if (f.values[i] == 0.0) continue;
    double a = f.origin + f.spacing * static_cast<double>(i);
    double b = a + f.spacing;
    for (std::size_t j = 0; j < g.values.size(); ++j) {
      if (g.values[j] == 0.0) continue;
      double c = g.origin + g.spacing * static_cast<double>(j);
      sum += f.values[i] * g.values[j] * increment_cov(a, b, c, c + g.spacing, p);
    }
  }
  return sum;
}

double gagliardo_form(const SampledFunction& f, const SampledFunction& g, const HurstParams& p) {
  double H = p.H();
  if (!(H < 0.5)) throw ValidationError("the Gagliardo representation requires H < 1/2");
  Aligned al = align(f, g);
  std::size_t n = al.f.size();
  if (n == 0) return 0.0;
  double e = p.two_h();

  // Cell pair at lag m >= 1: h^{2H} * phi[m].
  std::vector<double> phi(n, 0.0);
  for (std::size_t m = 1; m < n; ++m) phi[m] = second_difference(static_cast<double>(m), e) / (e * (e - 1.0));

  double inner = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      inner += (al.f[i] - al.f[j]) * (al.g[i] - al.g[j]) * phi[j - i];
    }
  }
  inner *= 2.0;

  // Cell against the exterior of the union support.
  double outer = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double fi = al.f[i] * al.g[i];
    if (fi == 0.0) continue;
    double di = static_cast<double>(i);
    double dn = static_cast<double>(n);
    double left = std::pow(di + 1.0, e) - std::pow(di, e);
    double right = std::pow(dn - di, e) - std::pow(dn - di - 1.0, e);
    outer += 2.0 * fi * (left + right) / (e * (1.0 - e));
  }
  return p.c_gagliardo() * std::pow(al.spacing, e) * (inner + outer);
}

quad::Estimate spectral_form(const SampledFunction& f, const SampledFunction& g, const HurstParams& p) {
  Aligned al = align(f, g);
  std::size_t n = al.f.size();
  if (n == 0) return {};
  double beta = p.beta();

  std::size_t N = 4096;
  while (N < 16 * n) N *= 2;
  const int Ni = static_cast<int>(N);
  auto in = detail::alloc_real(N);
  auto out_f = detail::alloc_complex(N / 2 + 1);
  auto out_g = detail::alloc_complex(N / 2 + 1);
  detail::Plan plan = detail::plan_r2c(Ni, in.get(), out_f.get());
  std::fill(in.get(), in.get() + N, 0.0);
  std::copy(al.f.begin(), al.f.end(), in.get());
  fftw_execute_dft_r2c(plan.get(), in.get(), out_f.get());
  std::fill(in.get(), in.get() + N, 0.0);
  std::copy(al.g.begin(), al.g.end(), in.get());
  fftw_execute_dft_r2c(plan.get(), in.get(), out_g.get());

  // w(theta) = 4 sin^2(theta/2) sum_k |theta + 2 pi k|^{beta-2}, folded onto (0, pi].
  const int K = 32;
  const double s = beta - 2.0;
  auto weight = [&](double th, double& tail_err) {
    tail_err = 0.0;
    double acc = std::pow(th, s);
    for (int k = 1; k <= K; ++k) {
      acc += std::pow(2.0 * kPi * k + th, s) + std::pow(2.0 * kPi * k - th, s);
    }
    // Tail k > K by the midpoint Euler-Maclaurin formula; the next term is
    // the reported error.
    double xp = 2.0 * kPi * (K + 0.5);
    double tp = 2.0 * kPi;
    for (double z : {xp + th, xp - th}) {
      acc += std::pow(z, beta - 1.0) / ((1.0 - beta) * tp);
      acc += tp * s * std::pow(z, s - 1.0) / 24.0;
      tail_err += 7.0 * std::abs(tp * tp * tp * s * (s - 1.0) * (s - 2.0) * std::pow(z, s - 3.0)) / 5760.0;
    }
    double sn = std::sin(0.5 * th);
    double w = 4.0 * sn * sn;
    tail_err *= w;
    return w * acc;
  };

  double sum = 0.0;
  double err = 0.0;
  for (std::size_t m = 1; m <= N / 2; ++m) {
    double th = 2.0 * kPi * static_cast<double>(m) / static_cast<double>(N);
    double te = 0.0;
    double w = weight(th, te);
    double re = out_f[m][0] * out_g[m][0] + out_f[m][1] * out_g[m][1];
    double mag = std::hypot(out_f[m][0], out_f[m][1]) * std::hypot(out_g[m][0], out_g[m][1]);
    double mult = (m == N / 2) ? 1.0 : 2.0;
    sum += mult * re * w;
    err += mult * mag * te;
  }
  double h = 2.0 * kPi / static_cast<double>(N);
  sum *= h;
  err *= h;
  // The theta = 0 node is dropped (|theta|^beta cusp); restore it with the
  // leading generalized Euler-Maclaurin term.
  double p0 = out_f[0][0] * out_g[0][0];
  sum -= 2.0 * std::riemann_zeta(-beta) * p0 * std::pow(h, 1.0 + beta);
  err += std::abs(2.0 * std::riemann_zeta(-beta - 2.0) * p0) * std::pow(h, 3.0 + beta);

  double scale = p.c_spectral() * std::pow(al.spacing, p.two_h());
  return {scale * sum, scale * err};
}

double power_antiderivative(double z, double two_h) {
  double a = std::abs(z);
  double v = std::pow(a, two_h + 1.0) / (two_h + 1.0);
  return z < 0.0 ? -v : v;
}

double linear_power_integral(double a, double slope, double len, double two_h) {
  if (len <= 0.0) return 0.0;
  if (slope == 0.0) return len * std::pow(std::abs(a), two_h);
  return (power_antiderivative(a + slope * len, two_h) - power_antiderivative(a, two_h)) / slope;
}

}  // namespace roughwave::frachilbert
