#include "roughwave/stats.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "roughwave/io.hpp"

namespace roughwave::stats {

namespace {

bool same(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(a)); }

const SiteSample& sites_at(const ReplicaResult& r, double t) {
  for (const auto& s : r.sites)
    if (same(s.t, t)) return s;
  throw ValidationError("no site samples retained at t = " + std::to_string(t));
}

}  // namespace

double spatial_average(const solver::Field& field, const noise::Lattice& lattice, double R) {
  return spatial_integral(field, lattice, R, [](double u) { return u - 1.0; });
}

double ReplicaResult::F_at(double R, double t) const {
  for (const auto& f : F)
    if (same(f.R, R) && same(f.t, t)) return f.F;
  throw ValidationError("F_R(t) not recorded for R = " + std::to_string(R) + ", t = " + std::to_string(t));
}

std::vector<double> collect_F(const std::vector<ReplicaResult>& rs, double R, double t) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(r.F_at(R, t));
  return out;
}

Moments moments(const std::vector<double>& xs) {
  Moments m;
  m.n = xs.size();
  if (m.n == 0) return m;
  double n = static_cast<double>(m.n);
  m.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double x : xs) {
    double d = x - m.mean;
    double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.variance = m.n > 1 ? m2 * n / (n - 1.0) : 0.0;
  if (m2 > 0.0) {
    m.skewness = m3 / std::pow(m2, 1.5);
    m.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  }
  return m;
}

LinearFit ols(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("ols needs at least two paired points");
  const double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw ValidationError("ols needs distinct abscissae");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (x.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    double s2 = rss / (n - 2.0);
    f.slope_se = std::sqrt(s2 / sxx);
    f.intercept_se = std::sqrt(s2 * (1.0 / n + mx * mx / sxx));
  }
  return f;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k < 200; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-18) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

double ks_normal(const std::vector<double>& xs, bool standardize) {
  if (xs.size() < 2) throw ValidationError("KS needs at least two samples");
  std::vector<double> z = xs;
  if (standardize) {
    Moments m = moments(xs);
    if (!(m.variance > 0.0)) throw NumericError("degenerate sample: zero variance");
    double s = std::sqrt(m.variance);
    for (auto& v : z) v = (v - m.mean) / s;
  }
  std::sort(z.begin(), z.end());
  const double n = static_cast<double>(z.size());
  double d = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    double F = normal_cdf(z[i]);
    d = std::max({d, (i + 1.0) / n - F, F - i / n});
  }
  return d;
}

TwoSampleKs ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ValidationError("two-sample KS needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double n = static_cast<double>(a.size());
  const double m = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(i / n - j / m));
  }
  TwoSampleKs r;
  r.D = d;
  double ne = n * m / (n + m);
  r.p_value = kolmogorov_sf((std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d);
  r.critical_1pct = 1.628 * std::sqrt((n + m) / (n * m));
  r.accept = d < r.critical_1pct;
  return r;
}

RSummary summarize(const std::vector<ReplicaResult>& rs, double R, double t) {
  auto xs = collect_F(rs, R, t);
  Moments m = moments(xs);
  RSummary s;
  s.R = R;
  s.t = t;
  s.M = xs.size();
  s.mean = m.mean;
  s.var = m.variance;
  s.var_over_R = m.variance / R;
  s.skewness = m.skewness;
  s.excess_kurtosis = m.excess_kurtosis;
  s.ks = (m.variance > 0.0 && xs.size() >= 2) ? ks_normal(xs) : 1.0;
  return s;
}

VarianceScan variance_scan(const std::vector<ReplicaResult>& rs, const std::vector<double>& R_list, double t,
                           std::size_t min_replicas) {
  if (R_list.size() < 3) throw ValidationError("variance_scan needs at least three values of R");
  if (rs.size() < min_replicas) {
    throw ValidationError("variance_scan needs M >= " + std::to_string(min_replicas) + " replicas");
  }
  VarianceScan out;
  out.t = t;
  std::vector<double> lx, ly;
  for (double R : R_list) {
    RSummary s = summarize(rs, R, t);
    if (!(s.var > 0.0) || !std::isfinite(s.var)) {
      throw NumericError("degenerate variance of F_R at R = " + std::to_string(R));
    }
    out.rows.push_back(s);
    lx.push_back(std::log(R));
    ly.push_back(std::log(s.var));
  }
  out.fit = ols(lx, ly);
  return out;
}

NormalityProfile normality_profile(const std::vector<ReplicaResult>& rs, const std::vector<double>& R_list, double t,
                                   std::size_t min_replicas) {
  if (R_list.size() < 2) throw ValidationError("normality_profile needs at least two values of R");
  if (rs.size() < min_replicas) {
    throw ValidationError("normality_profile needs M >= " + std::to_string(min_replicas) + " replicas");
  }
  NormalityProfile out;
  out.t = t;
  std::vector<double> lx, ly;
  for (double R : R_list) {
    RSummary s = summarize(rs, R, t);
    if (!(s.var > 0.0)) throw NumericError("degenerate variance of F_R at R = " + std::to_string(R));
    out.rows.push_back(s);
    lx.push_back(std::log(R));
    ly.push_back(std::log(s.ks));
  }
  out.fit = ols(lx, ly);
  return out;
}

double ergodic_functional(const solver::Field& field, const noise::Lattice& lattice, double R,
                          const ErgodicTestFunction& tf) {
  if (tf.b.size() != tf.zeta.size() || tf.b.empty()) throw ValidationError("test function needs matching b and zeta");
  std::vector<int> shift;
  for (double z : tf.zeta) {
    double s = z / lattice.delta;
    long k = std::lround(s);
    if (std::abs(s - k) > 1e-9 || k % 2 != 0) {
      throw ValidationError("ergodic shifts must be multiples of 2 delta");
    }
    shift.push_back(static_cast<int>(k));
  }
  const double d = lattice.delta;
  double total = 0.0;
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    int j = field.j_first + 2 * static_cast<int>(i);
    double x = lattice.x(j);
    double a = std::max(x - d, -R);
    double b = std::min(x + d, R);
    if (!(b > a)) continue;
    double arg = 0.0;
    for (std::size_t q = 0; q < shift.size(); ++q) {
      if (!field.contains(j + shift[q])) {
        throw ValidationError("[-R, R] shifted by zeta exceeds the exact region of the level");
      }
      arg += tf.b[q] * field.at(j + shift[q]);
    }
    total += (b - a) * std::cos(arg);
  }
  return total;
}

ErgodicReport ergodic_probe(const std::vector<ReplicaResult>& rs, const std::vector<double>& R_list, double t,
                            const std::vector<std::pair<double, double>>& site_pairs, double delta) {
  if (rs.size() < 2) throw ValidationError("ergodic_probe needs at least two replicas");
  ErgodicReport out;
  out.t = t;
  std::vector<double> lx, ly;
  for (double R : R_list) {
    ErgodicRow row;
    row.R = R;
    std::vector<double> us;
    for (const auto& r : rs) {
      bool found = false;
      for (const auto& u : r.U) {
        if (same(u.R, R) && same(u.t, t)) {
          us.push_back(u.U);
          found = true;
        }
      }
      if (!found) throw ValidationError("U_R not recorded for R = " + std::to_string(R));
    }
    Moments mu = moments(us);
    row.var_U = mu.variance;
    row.var_U_over_R = mu.variance / R;
    row.var_U_over_R2 = mu.variance / (R * R);
    std::vector<double> fr = collect_F(rs, R, t);
    for (auto& v : fr) v /= R;
    Moments mf = moments(fr);
    row.mean_F_over_R = mf.mean;
    row.se_F_over_R = std::sqrt(mf.variance / static_cast<double>(fr.size()));
    double ss = 0.0;
    for (double v : fr) ss += v * v;
    row.rms_F_over_R = std::sqrt(ss / static_cast<double>(fr.size()));
    out.rows.push_back(row);
    if (row.var_U > 0.0) {
      lx.push_back(std::log(R));
      ly.push_back(std::log(row.var_U_over_R));
    }
  }
  if (lx.size() >= 2) {
    out.growth = ols(lx, ly);
    out.var_bounded = out.growth.slope < out.growth_threshold;
  } else {
    out.var_bounded = true;  // Var U_R = 0 identically
  }
  const ErgodicRow& last = out.rows.back();
  out.lln_ok = std::abs(last.mean_F_over_R) <= 4.0 * last.se_F_over_R;

  out.site_pairs = site_pairs;
  out.stationary = true;
  for (const auto& [x1, x2] : site_pairs) {
    std::vector<double> a, b;
    for (const auto& r : rs) {
      const SiteSample& s = sites_at(r, t);
      auto value = [&](double x) {
        long j = std::lround(x / delta);
        long idx = j - s.j_first;
        if (std::abs(x / delta - j) > 1e-9 || idx < 0 || idx % 2 != 0 ||
            idx / 2 >= static_cast<long>(s.values.size())) {
          throw ValidationError("site x = " + std::to_string(x) + " is not among the retained samples");
        }
        return s.values[static_cast<std::size_t>(idx / 2)];
      };
      a.push_back(value(x1));
      b.push_back(value(x2));
    }
    TwoSampleKs k = ks_two_sample(a, b);
    out.stationarity.push_back(k);
    out.stationary = out.stationary && k.accept;
  }
  return out;
}

IncrementRatio increment_ratio(const std::vector<ReplicaResult>& rs, const std::vector<std::pair<double, double>>& st,
                               double R) {
  IncrementRatio out;
  out.R = R;
  out.pairs = st;
  for (const auto& [s, t] : st) {
    double acc = 0.0;
    for (const auto& r : rs) {
      double d = r.F_at(R, t) - r.F_at(R, s);
      acc += d * d;
    }
    double l2 = rs.empty() ? 0.0 : std::sqrt(acc / static_cast<double>(rs.size()));
    double gap = std::abs(t - s);
    out.ratios.push_back(gap > 0.0 ? l2 / std::sqrt(R * gap) : 0.0);
  }
  std::vector<double> pos;
  for (double r : out.ratios)
    if (r > 0.0) pos.push_back(r);
  out.spread = pos.empty() ? 0.0 : *std::max_element(pos.begin(), pos.end()) / *std::min_element(pos.begin(), pos.end());
  return out;
}

ConjectureReport conjecture_probe(const std::vector<ReplicaResult>& rs, double t, double x_max, double delta) {
  if (rs.size() < 2) throw ValidationError("conjecture_probe needs at least two replicas");
  ConjectureReport out;
  out.t = t;
  out.x_max = x_max;
  const int max_lag = static_cast<int>(std::floor(x_max / (2.0 * delta) + 1e-9));
  const SiteSample& s0 = sites_at(rs.front(), t);
  const int n = static_cast<int>(s0.values.size());
  if (max_lag >= n) throw ValidationError("x_max exceeds the retained site window");

  // pooled mean over sites and replicas (stationarity)
  double mean = 0.0;
  double count = 0.0;
  for (const auto& r : rs) {
    const SiteSample& s = sites_at(r, t);
    if (static_cast<int>(s.values.size()) != n) throw ValidationError("site windows differ across replicas");
    for (double v : s.values) mean += v;
    count += n;
  }
  mean /= count;

  std::vector<double> lhs_per;
  std::vector<double> pooled(static_cast<std::size_t>(max_lag + 1), 0.0);
  for (const auto& r : rs) {
    const auto& v = sites_at(r, t).values;
    std::vector<double> c(static_cast<std::size_t>(max_lag + 1), 0.0);
    for (int l = 0; l <= max_lag; ++l) {
      double acc = 0.0;
      for (int i = 0; i + l < n; ++i) acc += (v[i] - mean) * (v[i + l] - mean);
      c[static_cast<std::size_t>(l)] = acc / (n - l);
      pooled[static_cast<std::size_t>(l)] += c[static_cast<std::size_t>(l)];
    }
    // 2 * trapezoid over [-x_max, x_max] of an even curve with step 2 delta
    double integral = c[0];
    for (int l = 1; l <= max_lag; ++l) integral += (l == max_lag ? 1.0 : 2.0) * c[static_cast<std::size_t>(l)];
    if (max_lag == 0) integral = 0.0;
    lhs_per.push_back(2.0 * 2.0 * delta * integral);
  }
  for (int l = 0; l <= max_lag; ++l) {
    out.lags.push_back(2.0 * delta * l);
    out.covariance.push_back(pooled[static_cast<std::size_t>(l)] / static_cast<double>(rs.size()));
  }
  Moments m = moments(lhs_per);
  out.lhs = m.mean;
  out.lhs_se = std::sqrt(m.variance / static_cast<double>(lhs_per.size()));
  return out;
}

std::string replica_csv(const std::vector<ReplicaResult>& rs) {
  std::ostringstream os;
  os << "replica,seed,R,t,F_R\n";
  for (const auto& r : rs) {
    for (const auto& f : r.F) {
      os << r.replica << ',' << r.seed << ',' << io::format_double(f.R) << ',' << io::format_double(f.t) << ','
         << io::format_double(f.F) << '\n';
    }
  }
  return os.str();
}

std::string summary_csv(const std::vector<RSummary>& rows, const LinearFit* fit, const std::string& fit_name) {
  std::ostringstream os;
  os << "R,t,M,mean,var,var_over_R,KS,skewness,excess_kurtosis";
  if (fit) os << ',' << fit_name << "_slope," << fit_name << "_slope_se," << fit_name << "_intercept";
  os << '\n';
  for (const auto& r : rows) {
    os << io::format_double(r.R) << ',' << io::format_double(r.t) << ',' << r.M << ',' << io::format_double(r.mean)
       << ',' << io::format_double(r.var) << ',' << io::format_double(r.var_over_R) << ','
       << io::format_double(r.ks) << ',' << io::format_double(r.skewness) << ','
       << io::format_double(r.excess_kurtosis);
    if (fit) {
      os << ',' << io::format_double(fit->slope) << ',' << io::format_double(fit->slope_se) << ','
         << io::format_double(fit->intercept);
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace roughwave::stats
