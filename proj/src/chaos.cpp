#include "roughwave/chaos.hpp"

#include <boost/math/interpolators/cardinal_cubic_b_spline.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <sstream>

#include "roughwave/errors.hpp"
#include "roughwave/io.hpp"

namespace roughwave::chaos {

namespace {

constexpr double kPi = std::numbers::pi;

double sinc2(double m) {
  if (std::abs(m) < 1e-4) return 1.0 - m * m / 3.0;
  double s = std::sin(m) / m;
  return s * s;
}

// Integral over [X, inf) of nu^p exp(i omega nu). omega = 0 needs p < -1.
std::complex<double> power_trig_tail(double p, double omega, double X) {
  if (omega == 0.0) {
    if (!(p < -1.0)) throw NumericError("divergent power tail");
    return {-std::pow(X, p + 1.0) / (p + 1.0), 0.0};
  }
  const double a = std::abs(omega);
  std::complex<double> head{0.0, 0.0};
  const double x_series = 40.0 / a;
  if (X < x_series) {
    auto re = quad::panels([&](double v) { return std::pow(v, p) * std::cos(a * v); }, X, x_series, kPi / (2.0 * a));
    auto im = quad::panels([&](double v) { return std::pow(v, p) * std::sin(a * v); }, X, x_series, kPi / (2.0 * a));
    head = {re.value, im.value};
    X = x_series;
  }
  // I(p) = -e^{iaX} X^p/(ia) - p/(ia) I(p-1), unrolled.
  const std::complex<double> ia{0.0, a};
  std::complex<double> c{1.0, 0.0};
  std::complex<double> sum{0.0, 0.0};
  double prev = INFINITY;
  for (int k = 0; k < 60; ++k) {
    std::complex<double> term = c * std::pow(X, p - k);
    double mag = std::abs(term);
    if (mag > prev) break;
    sum += term;
    if (mag < 1e-18 * std::abs(sum)) break;
    prev = mag;
    c *= -(p - k) / ia;
  }
  std::complex<double> tail = -std::exp(ia * X) / ia * sum;
  std::complex<double> out = head + tail;
  return omega < 0.0 ? std::conj(out) : out;
}

// Integral over [X, inf) of sin^2(g nu) nu^p, p < -1.
double sin2_tail(double p, double g, double X) {
  return 0.5 * (-std::pow(X, p + 1.0) / (p + 1.0)) - 0.5 * power_trig_tail(p, 2.0 * g, X).real();
}

// B(L, eta) = integral over [0, L] of sin^2(b eta)/eta^2 db = 2 L^3 phi(2 L eta).
double B_kernel(double L, double eta) {
  double z = 2.0 * L * std::abs(eta);
  double phi;
  if (z < 1.0) {
    // (z - sin z)/z^3 = sum_k (-1)^{k+1} z^{2k-2}/(2k+1)!
    double term = 1.0 / 6.0;
    phi = 0.0;
    for (int k = 1; k < 12; ++k) {
      phi += term;
      term *= -z * z / ((2.0 * k + 2.0) * (2.0 * k + 3.0));
    }
  } else {
    phi = (z - std::sin(z)) / (z * z * z);
  }
  return 2.0 * L * L * L * phi;
}

// Q(L, eta)/eta^2, where Q(L, eta) = integral over [0, L] of (L - g)^3 sin^2(g eta) dg
// = L^4 (1/8 - 3 psi(2 L eta)) with psi(z) = (cos z - 1 + z^2/2)/z^4.
double Q_over_eta2(double L, double eta) {
  double z = 2.0 * L * std::abs(eta);
  double L4 = L * L * L * L;
  if (z < 1.0) {
    // (1/8 - 3 psi(z))/z^2 = 3 sum_{k>=3} (-1)^{k+1} z^{2k-6}/(2k)!
    double term = 3.0 / 720.0;
    double s = 0.0;
    for (int k = 3; k < 14; ++k) {
      s += term;
      term *= -z * z / ((2.0 * k + 1.0) * (2.0 * k + 2.0));
    }
    return 4.0 * L4 * L * L * s;
  }
  double psi = (std::cos(z) - 1.0 + 0.5 * z * z) / (z * z * z * z);
  return L4 * (0.125 - 3.0 * psi) / (eta * eta);
}

double binom_gen(double q, int m) {
  double c = 1.0;
  for (int i = 0; i < m; ++i) c *= (q - i) / (i + 1.0);
  return c;
}

// Integral over R of sinc^2(mu) |mu|^q1 |w - mu|^q2, w >= 0.
double kernel_integral(double w, double q1, double q2) {
  const double X = kPi * std::ceil(std::max(2.5 * w, 40.0 * kPi) / kPi);
  auto f = [&](double mu) { return sinc2(mu) * std::pow(std::abs(mu), q1) * std::pow(std::abs(w - mu), q2); };
  const double h = kPi / 2.0;
  double total = 0.0;
  auto segment = [&](double lo, double hi, bool sing_lo, bool sing_hi) {
    if (!(hi > lo)) return;
    int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / h)));
    double step = (hi - lo) / n;
    for (int i = 0; i < n; ++i) {
      double a = lo + i * step;
      double b = (i + 1 == n) ? hi : a + step;
      bool ts = (i == 0 && sing_lo) || (i + 1 == n && sing_hi);
      total += ts ? quad::tanh_sinh(f, a, b, 1e-12, 3).value : quad::gk15(f, a, b).value;
    }
  };
  segment(-X, 0.0, false, true);
  segment(0.0, w, true, true);
  segment(w, X, true, false);
  // Both tails together: 2 nu^{q1+q2} sum_{m even} binom(q2, m) (w/nu)^m.
  double tail = 0.0;
  for (int m = 0; m < 80; m += 2) {
    double c = 2.0 * binom_gen(q2, m) * std::pow(w, m);
    double term = c * sin2_tail(q1 + q2 - 2.0 - m, 1.0, X);
    tail += term;
    if (std::abs(term) < 1e-17 * std::abs(tail)) break;
  }
  return total + tail;
}

// J(w)  = integral of sinc^2(mu) |mu|^beta |w - mu|^beta
// J1(w) = integral of sinc^2(mu) |w - mu|^beta
// tabulated on a sqrt(w)-uniform grid up to w_max with power-law asymptotics beyond.
class KernelTables {
 public:
  explicit KernelTables(double beta) : beta_(beta) {
    const int n = 1025;
    const double s_max = std::sqrt(w_max_);
    h_ = s_max / (n - 1);
    std::vector<double> j(n), j1(n);
    for (int i = 0; i < n; ++i) {
      double s = i * h_;
      j[i] = kernel_integral(s * s, beta, beta);
      j1[i] = kernel_integral(s * s, 0.0, beta);
    }
    c_j_ = sin_int_constant(beta).value;
    a_j_ = (j.back() - c_j_ * std::pow(w_max_, beta)) / std::pow(w_max_, 2.0 * beta - 1.0);
    a_j1_ = (j1.back() - kPi * std::pow(w_max_, beta)) / std::pow(w_max_, beta - 1.0);
    spline_j_ = std::make_unique<Spline>(j.begin(), j.end(), 0.0, h_, 0.0);
    spline_j1_ = std::make_unique<Spline>(j1.begin(), j1.end(), 0.0, h_, 0.0);
  }

  double J(double w) const {
    w = std::abs(w);
    if (w <= w_max_) return (*spline_j_)(std::sqrt(w));
    return c_j_ * std::pow(w, beta_) + a_j_ * std::pow(w, 2.0 * beta_ - 1.0);
  }
  double J1(double w) const {
    w = std::abs(w);
    if (w <= w_max_) return (*spline_j1_)(std::sqrt(w));
    return kPi * std::pow(w, beta_) + a_j1_ * std::pow(w, beta_ - 1.0);
  }

  // Integral over [w0, inf) of w^p F(w), F = J (second = false) or J1.
  double tail(bool first, double p, double w0) const {
    double e1 = beta_;
    double e2 = first ? 2.0 * beta_ - 1.0 : beta_ - 1.0;
    double c1 = first ? c_j_ : kPi;
    double c2 = first ? a_j_ : a_j1_;
    double total = 0.0;
    double start = w0;
    if (w0 < w_max_) {
      auto f = [&](double w) { return std::pow(w, p) * (first ? J(w) : J1(w)); };
      double lo = w0;
      if (lo < 1.0) {
        total += quad::geometric_panels(f, lo, 1.0).value;
        lo = 1.0;
      }
      total += quad::panels(f, lo, w_max_, kPi / 2.0).value;
      start = w_max_;
    }
    total += -c1 * std::pow(start, p + e1 + 1.0) / (p + e1 + 1.0);
    total += -c2 * std::pow(start, p + e2 + 1.0) / (p + e2 + 1.0);
    return total;
  }

  double beta() const { return beta_; }
  double w_max() const { return w_max_; }
  double c_j() const { return c_j_; }
  double a_j() const { return a_j_; }
  double a_j1() const { return a_j1_; }

 private:
  using Spline = boost::math::interpolators::cardinal_cubic_b_spline<double>;
  double beta_;
  double w_max_ = 128.0;
  double h_ = 0.0;
  double c_j_ = 0.0, a_j_ = 0.0, a_j1_ = 0.0;
  std::unique_ptr<Spline> spline_j_, spline_j1_;
};

std::shared_ptr<const KernelTables> tables_for(double beta) {
  static std::mutex mu;
  static std::map<double, std::shared_ptr<const KernelTables>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(beta);
  if (it != cache.end()) return it->second;
  auto t = std::make_shared<const KernelTables>(beta);
  cache.emplace(beta, t);
  return t;
}

void require_t(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw ValidationError("t must be positive and finite");
}

// Upper limit of the resolved frequency range and its panel width.
struct FreqGrid {
  double width;
  double eta_b;
};

FreqGrid freq_grid(double L, double scale, double n_b = 64.0 * kPi, int max_panels = 2048) {
  double width = kPi / (4.0 * std::max(scale, 1e-12));
  double eta_b = n_b / std::max(L, 1e-300);
  eta_b = std::min(eta_b, max_panels * width);
  eta_b = std::max(eta_b, 4.0 * width);
  return {width, eta_b};
}

// 2 * integral over [0, eta_b] of f, first panel by tanh-sinh (kinks at 0).
template <class F>
quad::Estimate resolved_part(F&& f, const FreqGrid& g) {
  quad::Estimate e = quad::tanh_sinh(f, 0.0, g.width, 1e-10, 3);
  e += quad::panels(f, g.width, g.eta_b, g.width);
  return 2.0 * e;
}

// Integral over R of cos(eta x) B(L, eta) J(a eta).
quad::Estimate inner_rho2(const KernelTables& tb, double a, double L, double x) {
  if (L <= 0.0) return {};
  FreqGrid g = freq_grid(L, std::max({L, a, std::abs(x)}));
  auto f = [&](double eta) { return std::cos(eta * x) * B_kernel(L, eta) * tb.J(a * eta); };
  quad::Estimate e = resolved_part(f, g);
  const double X = g.eta_b;
  // beyond X: B = L/(2 eta^2) - sin(2 L eta)/(4 eta^3); the second part is only bounded
  double bound = 2.0 * tb.J(a * X) / (8.0 * X * X);
  double main;
  if (x == 0.0) {
    main = (a * X > 1e-10) ? 0.5 * L * a * tb.tail(true, -2.0, a * X) : 0.5 * L * tb.J(0.0) / X;
  } else {
    auto fm = [&](double eta) { return 0.5 * L * tb.J(a * eta) / (eta * eta); };
    double d = 1e-4 * X;
    double f0 = fm(X);
    double f1 = (fm(X + d) - fm(X - d)) / (2.0 * d);
    main = -std::sin(x * X) * f0 / x - std::cos(x * X) * f1 / (x * x);
    bound += 6.0 * std::abs(f0) / (X * X * std::abs(x * x * x));
  }
  e.value += 2.0 * main;
  e.error += bound;
  return e;
}

// Integral over R of B(L, eta) |eta|^beta J1(c eta).
quad::Estimate inner_rho2_alt(const KernelTables& tb, double c, double L) {
  if (L <= 0.0) return {};
  const double beta = tb.beta();
  FreqGrid g = freq_grid(L, std::max(L, c));
  auto f = [&](double eta) { return B_kernel(L, eta) * std::pow(eta, beta) * tb.J1(c * eta); };
  quad::Estimate e = resolved_part(f, g);
  const double X = g.eta_b;
  double main = (c * X > 1e-10) ? 0.5 * L * std::pow(c, 1.0 - beta) * tb.tail(false, beta - 2.0, c * X)
                          : 0.5 * L * tb.J1(0.0) * std::pow(X, beta - 1.0) / (1.0 - beta);
  e.value += 2.0 * main;
  e.error += 2.0 * std::pow(X, beta) * tb.J1(c * X) / (8.0 * X * X);
  return e;
}

// Integral over R of B(L, eta) J(a eta) J1(c eta).
quad::Estimate inner_rho3(const KernelTables& tb, double a, double c, double L) {
  if (L <= 0.0) return {};
  const double beta = tb.beta();
  FreqGrid g = freq_grid(L, std::max({L, a, c}), 16.0 * kPi, 512);
  auto f = [&](double eta) { return B_kernel(L, eta) * tb.J(a * eta) * tb.J1(c * eta); };
  quad::Estimate e = resolved_part(f, g);
  const double X = g.eta_b;
  const double small = std::min(a, c);
  // Past 1e6 X the smaller argument may still be below w_max; the asymptotic
  // form is then applied anyway and its whole contribution booked as error.
  const double eta_t = std::min(small > 0.0 ? tb.w_max() / small : INFINITY, 1e6 * X);
  auto fm = [&](double eta) { return 0.5 * L * tb.J(a * eta) * tb.J1(c * eta) / (eta * eta); };
  double main = 0.0;
  double start = X;
  if (eta_t > X) {
    main += quad::geometric_panels(fm, X, eta_t).value;
    start = eta_t;
  }
  const bool capped = small * start < tb.w_max();
  // both factors asymptotic from here on
  const double C = tb.c_j(), A = tb.a_j(), A1 = tb.a_j1();
  struct Term {
    double coef, e;
  } terms[] = {
      {C * kPi * std::pow(a * c, beta), 2.0 * beta},
      {C * A1 * std::pow(a, beta) * std::pow(c, beta - 1.0), 2.0 * beta - 1.0},
      {A * kPi * std::pow(a, 2.0 * beta - 1.0) * std::pow(c, beta), 3.0 * beta - 1.0},
      {A * A1 * std::pow(a, 2.0 * beta - 1.0) * std::pow(c, beta - 1.0), 3.0 * beta - 2.0},
  };
  double asym = 0.0;
  for (const auto& t : terms) asym += 0.5 * L * (-t.coef * std::pow(start, t.e - 1.0) / (t.e - 1.0));
  main += asym;
  e.value += 2.0 * main;
  e.error += 2.0 * tb.J(a * X) * tb.J1(c * X) / (8.0 * X * X);
  if (capped) e.error += 2.0 * std::abs(asym) + L * tb.J(a * start) * tb.J1(c * start) / start;
  return e;
}

// Integral over R of |eta|^{beta-2} Q(L, eta) J(a eta).
quad::Estimate inner_k3(const KernelTables& tb, double a, double L) {
  if (L <= 0.0) return {};
  const double beta = tb.beta();
  FreqGrid g = freq_grid(L, std::max(L, a));
  auto f = [&](double eta) { return std::pow(eta, beta) * Q_over_eta2(L, eta) * tb.J(a * eta); };
  quad::Estimate e = resolved_part(f, g);
  const double X = g.eta_b;
  // beyond X: Q = L^4/8 - 3 L^2/(8 eta^2) + 3/(16 eta^4) - 3 cos(2 L eta)/(16 eta^4)
  auto moment = [&](double p) {
    // integral over [X, inf) of eta^p J(a eta)
    if (a * X > 1e-10) return std::pow(a, -p - 1.0) * tb.tail(true, p, a * X);
    return -tb.J(0.0) * std::pow(X, p + 1.0) / (p + 1.0);
  };
  double L2 = L * L;
  double main = L2 * L2 / 8.0 * moment(beta - 2.0) - 3.0 * L2 / 8.0 * moment(beta - 4.0) +
                3.0 / 16.0 * moment(beta - 6.0);
  e.value += 2.0 * main;
  e.error += 2.0 * 3.0 / 16.0 * moment(beta - 6.0);
  return e;
}

}  // namespace

const char* to_string(KappaConvention k) { return k == KappaConvention::spectral ? "c_H" : "C_H"; }

KappaConvention parse_kappa(const std::string& s) {
  if (s == "c_H" || s == "spectral" || s == "c") return KappaConvention::spectral;
  if (s == "C_H" || s == "gagliardo" || s == "C") return KappaConvention::gagliardo;
  throw ValidationError("unknown kappa convention '" + s + "' (expected c_H or C_H)");
}

double kappa(const HurstParams& p, KappaConvention k) {
  return k == KappaConvention::spectral ? p.c_spectral() : p.c_gagliardo();
}

quad::Estimate sin_int_constant(double alpha) {
  if (!(alpha > -1.0 && alpha < 1.0)) throw ValidationError("sin_int needs -1 < alpha < 1");
  static std::mutex mu;
  static std::map<double, quad::Estimate> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(alpha);
    if (it != cache.end()) return it->second;
  }
  auto f = [&](double xi) { return sinc2(xi) * std::pow(xi, alpha); };
  const double X = 64.0 * kPi;
  quad::Estimate e = quad::tanh_sinh(f, 0.0, 1.0, 1e-14, 3);
  e += quad::panels(f, 1.0, X, kPi / 4.0);
  e.value += sin2_tail(alpha - 2.0, 1.0, X);
  e.error += 1e-15 * std::abs(e.value);
  e = 2.0 * e;
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(alpha, e);
  return e;
}

double sin_int(double alpha, double t) {
  require_t(t);
  return sin_int_constant(alpha).value * std::pow(t, 1.0 - alpha);
}

double beta_int(const std::vector<double>& alphas, double t) {
  require_t(t);
  if (alphas.empty()) throw ValidationError("beta_int needs at least one exponent");
  double log_num = 0.0;
  double sum = 0.0;
  for (double a : alphas) {
    if (!(a > -1.0)) throw ValidationError("beta_int needs every alpha_j > -1");
    log_num += std::lgamma(a + 1.0);
    sum += a;
  }
  const double n = static_cast<double>(alphas.size());
  return std::exp(log_num - std::lgamma(sum + n + 1.0) + (sum + n) * std::log(t));
}

double gamma1_closed(double t, double x, const HurstParams& p, KappaConvention k) {
  require_t(t);
  const double h2 = p.two_h();
  double v = 0.25 * (0.25 * (frachilbert::power_antiderivative(x + 2.0 * t, h2) -
                             frachilbert::power_antiderivative(x - 2.0 * t, h2)) -
                     t * std::pow(std::abs(x), h2));
  return kappa(p, k) / p.c_spectral() * v;
}

namespace {

// gamma_1 by frequency quadrature: 2 kappa integral over [0, inf) of cos(eta x) B(t, eta) eta^beta.
quad::Estimate gamma1_freq(double t, double x, const HurstParams& p, KappaConvention k) {
  const double beta = p.beta();
  const double scale = std::max(t, std::abs(x));
  FreqGrid g{kPi / (4.0 * scale), 256.0 * kPi / (4.0 * scale)};
  auto f = [&](double eta) { return std::cos(eta * x) * B_kernel(t, eta) * std::pow(eta, beta); };
  quad::Estimate e = resolved_part(f, g);
  const double X = g.eta_b;
  double tail = 0.5 * t * power_trig_tail(beta - 2.0, x, X).real() -
                0.125 * (power_trig_tail(beta - 3.0, 2.0 * t + x, X).imag() +
                         power_trig_tail(beta - 3.0, 2.0 * t - x, X).imag());
  e.value += 2.0 * tail;
  return kappa(p, k) * e;
}

}  // namespace

ChaosTerm gamma_n(int n, double t, double x, const HurstParams& p, const ChaosOptions& opt) {
  require_t(t);
  ChaosTerm out;
  out.order = n;
  out.t = t;
  out.x = x;
  out.convention = opt.convention;
  if (n == 1) {
    auto e = gamma1_freq(t, x, p, opt.convention);
    out.value = e.value;
    out.error = e.error + 1e-12 * std::abs(e.value);
    return out;
  }
  if (n == 2) {
    SeriesResult r = rho_trunc(t, x, p, 2, opt.convention);
    out.value = 2.0 * r.terms[1].value;
    out.error = 2.0 * r.terms[1].error;
    return out;
  }
  if (n == 3) {
    if (!opt.allow_order3) throw ValidationError("gamma_n order 3 is opt-in (slow 3-D quadrature)");
    SeriesResult r = rho_trunc(t, x, p, 3, opt.convention);
    out.value = 6.0 * r.terms[2].value;
    out.error = 6.0 * r.terms[2].error;
    return out;
  }
  throw ValidationError("gamma_n supports orders 1 and 2 (3 opt-in); requested " + std::to_string(n));
}

namespace {

quad::Estimate rho2(double t, double x, const HurstParams& p, KappaConvention k) {
  auto tb = tables_for(p.beta());
  const double beta = p.beta();
  double err = 0.0;
  auto f = [&](double a, double ac) {
    double L = ac > 0.0 ? ac : t - a;
    auto e = inner_rho2(*tb, a, L, x);
    double w = std::pow(a, 1.0 - 2.0 * beta);
    err = std::max(err, w * e.error);
    return w * e.value;
  };
  quad::Estimate e = quad::tanh_sinh(f, 0.0, t, 1e-8, 1);
  e.error += err * t;
  double k2 = kappa(p, k) * kappa(p, k);
  return k2 * e;
}

quad::Estimate rho3(double t, const HurstParams& p, KappaConvention k) {
  auto tb = tables_for(p.beta());
  const double beta = p.beta();
  double err = 0.0;
  auto outer = [&](double a, double ac) {
    double rest = ac > 0.0 ? ac : t - a;
    if (a < 1e-14) return 0.0;  // weight a^{1-2 beta} makes the strip negligible
    auto inner = [&](double c, double cc) {
      if (c < 1e-14) return 0.0;
      double L = cc > 0.0 ? cc : rest - c;
      auto e = inner_rho3(*tb, a, c, L);
      double w = std::pow(c, 1.0 - beta);
      err = std::max(err, w * std::pow(a, 1.0 - 2.0 * beta) * e.error);
      return w * e.value;
    };
    return std::pow(a, 1.0 - 2.0 * beta) * quad::tanh_sinh(inner, 0.0, rest, 1e-5, 2).value;
  };
  quad::Estimate e = quad::tanh_sinh(outer, 0.0, t, 1e-5, 1);
  e.error += err * t * t / 2.0 + 1e-6 * std::abs(e.value);
  double kk = kappa(p, k);
  return kk * kk * kk * e;
}

void fill_tail(SeriesResult& r) {
  const auto& ts = r.terms;
  if (ts.size() < 2) {
    r.tail_method = "none (single term)";
    r.tail_estimate = 0.0;
    return;
  }
  double last = ts.back().value;
  double ratio = last / ts[ts.size() - 2].value;
  if (ratio > 0.0 && ratio < 1.0) {
    r.tail_method = "geometric (last term ratio " + io::format_double(ratio) + ")";
    r.tail_estimate = last * ratio / (1.0 - ratio);
  } else {
    r.tail_method = "not estimable (term ratio outside (0, 1))";
    r.tail_estimate = 0.0;
  }
}

}  // namespace

SeriesResult rho_trunc(double t, double x, const HurstParams& p, int n_max, KappaConvention k) {
  require_t(t);
  if (n_max < 1 || n_max > 3) throw ValidationError("rho_trunc supports n_max in {1, 2, 3}");
  if (n_max == 3 && x != 0.0) throw ValidationError("the order-3 term is available at x = 0 only");
  SeriesResult r;
  auto add = [&](int n, quad::Estimate e) {
    ChaosTerm c;
    c.order = n;
    c.t = t;
    c.x = x;
    c.value = e.value;
    c.error = e.error;
    c.convention = k;
    r.terms.push_back(c);
    r.partial_sum += e.value;
    r.quadrature_error += e.error;
  };
  auto g1 = gamma1_freq(t, x, p, k);
  add(1, g1);
  if (n_max >= 2) add(2, rho2(t, x, p, k));
  if (n_max >= 3) add(3, rho3(t, p, k));
  fill_tail(r);
  return r;
}

quad::Estimate rho2_alternate(double t, const HurstParams& p, KappaConvention k) {
  require_t(t);
  auto tb = tables_for(p.beta());
  const double beta = p.beta();
  double err = 0.0;
  auto f = [&](double c, double cc) {
    double L = cc > 0.0 ? cc : t - c;
    auto e = inner_rho2_alt(*tb, c, L);
    double w = std::pow(c, 1.0 - beta);
    err = std::max(err, w * e.error);
    return w * e.value;
  };
  quad::Estimate e = quad::tanh_sinh(f, 0.0, t, 1e-8, 1);
  e.error += err * t;
  double k2 = kappa(p, k) * kappa(p, k);
  return k2 * e;
}

double K2_closed(double t, const HurstParams& p, KappaConvention k) {
  require_t(t);
  const double h4 = 4.0 * p.H();
  double kk = kappa(p, k);
  double c = sin_int_constant(2.0 - h4).value;
  return 4.0 * kPi * kk * kk * c * 2.0 * std::pow(t, h4 + 3.0) / (h4 * (h4 + 1.0) * (h4 + 2.0) * (h4 + 3.0));
}

quad::Estimate K2_direct(double t, const HurstParams& p, KappaConvention k) {
  require_t(t);
  const double q = 2.0 * p.beta();
  // S(g) = integral over R of sin^2(g eta)/eta^2 |eta|^{2 beta}, evaluated in eta directly.
  auto S = [&](double g) {
    if (g < 1e-12) return 0.0;
    auto f = [&](double eta) {
      return g * g * sinc2(g * eta) * std::pow(eta, q);
    };
    const double w = kPi / (2.0 * g);
    const double X = 128.0 * w;
    double v = quad::tanh_sinh(f, 0.0, w, 1e-12, 3).value;
    v += quad::panels(f, w, X, w).value;
    v += sin2_tail(q - 2.0, g, X);
    return 2.0 * v;
  };
  auto outer = [&](double t2, double t2c) {
    double rem = t2c > 0.0 ? t2c : t - t2;
    auto inner = [&](double t1, double t1c) {
      double gap = t1c > 0.0 ? t1c : t2 - t1;
      return S(gap);
    };
    return rem * rem * quad::tanh_sinh(inner, 0.0, t2, 1e-10, 2).value;
  };
  quad::Estimate e = quad::tanh_sinh(outer, 0.0, t, 1e-10, 1);
  double kk = kappa(p, k);
  e.error += 1e-9 * std::abs(e.value);
  return 4.0 * kPi * kk * kk * e;
}

quad::Estimate K3(double t, const HurstParams& p, KappaConvention k) {
  require_t(t);
  auto tb = tables_for(p.beta());
  const double beta = p.beta();
  double err = 0.0;
  auto f = [&](double a, double ac) {
    double L = ac > 0.0 ? ac : t - a;
    auto e = inner_k3(*tb, a, L);
    double w = std::pow(a, 1.0 - 2.0 * beta);
    err = std::max(err, w * e.error);
    return w * e.value;
  };
  quad::Estimate e = quad::tanh_sinh(f, 0.0, t, 1e-8, 1);
  e.error += err * t;
  double kk = kappa(p, k);
  return (4.0 * kPi / 3.0) * kk * kk * kk * e;
}

SeriesResult K_trunc(double t, const HurstParams& p, int n_max, KappaConvention k) {
  require_t(t);
  if (n_max < 2 || n_max > 3) throw ValidationError("K_trunc supports n_max in {2, 3}");
  SeriesResult r;
  ChaosTerm c2;
  c2.order = 2;
  c2.t = t;
  c2.value = K2_closed(t, p, k);
  c2.error = sin_int_constant(2.0 - 4.0 * p.H()).error / sin_int_constant(2.0 - 4.0 * p.H()).value * c2.value;
  c2.convention = k;
  r.terms.push_back(c2);
  r.partial_sum = c2.value;
  r.quadrature_error = c2.error;
  if (n_max >= 3) {
    auto e = K3(t, p, k);
    ChaosTerm c3 = c2;
    c3.order = 3;
    c3.value = e.value;
    c3.error = e.error;
    r.terms.push_back(c3);
    r.partial_sum += e.value;
    r.quadrature_error += e.error;
  }
  fill_tail(r);
  return r;
}

quad::Estimate gamma1_window(double t, double R, const HurstParams& p, KappaConvention k) {
  require_t(t);
  if (!(R > 0.0)) throw ValidationError("R must be positive");
  auto f = [&](double z) { return (2.0 * R - z) * gamma1_closed(t, z, p, k); };
  quad::Estimate e;
  double knee = std::min(2.0 * t, 2.0 * R);
  e += quad::tanh_sinh(f, 0.0, knee, 1e-12, 1);
  if (2.0 * R > knee) e += quad::tanh_sinh(f, knee, 2.0 * R, 1e-12, 1);
  return 2.0 * e;
}

std::vector<TableRow> chaos_table(const HurstParams& p, const std::vector<double>& ts, const std::vector<double>& xs,
                                  int n_max, KappaConvention k) {
  std::vector<TableRow> rows;
  for (double t : ts) {
    for (double x : xs) {
      int top = (x == 0.0) ? n_max : std::min(n_max, 2);
      SeriesResult r = rho_trunc(t, x, p, top, k);
      double fact = 1.0;
      for (const auto& term : r.terms) {
        fact *= term.order;
        rows.push_back({p.H(), t, x, term.order, fact * term.value, fact * term.error, k});
      }
    }
  }
  return rows;
}

std::string table_csv(const std::vector<TableRow>& rows) {
  std::ostringstream os;
  os << "H,t,x,n,value,error_estimate,kappa_convention\n";
  for (const auto& r : rows) {
    os << io::format_double(r.H) << ',' << io::format_double(r.t) << ',' << io::format_double(r.x) << ',' << r.n
       << ',' << io::format_double(r.value) << ',' << io::format_double(r.error) << ',' << to_string(r.convention)
       << '\n';
  }
  return os.str();
}

}  // namespace roughwave::chaos
