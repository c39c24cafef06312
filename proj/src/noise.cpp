#include "roughwave/noise.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <sstream>

#include "fftw_guard.hpp"
#include "roughwave/errors.hpp"
#include "roughwave/io.hpp"

namespace roughwave::noise {

namespace {

using frachilbert::power_antiderivative;

// Beyond this offset (in units of delta) the closed forms lose digits to
// cancellation and the binomial tail series takes over.
constexpr double kSeriesCutoff = 64.0;

// Like-kind covariance at centre offset d (units of delta), in units of delta^{2H+1}.
double like_closed(double d, double e) {
  d = std::abs(d);
  return 0.25 * (power_antiderivative(d + 2.0, e) - power_antiderivative(d - 2.0, e)) - std::pow(d, e);
}

double like_series(double d, double e) {
  d = std::abs(d);
  double sum = 0.0;
  double binom = 1.0;
  double x = 2.0 / d;
  double pw = 1.0;
  for (int k = 1; k <= 30; ++k) {
    binom *= (e - (k - 1)) / k;
    pw *= x;
    if (k % 2 == 0) {
      double term = binom * pw / (k + 1);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
  }
  return std::pow(d, e) * sum;
}

double cross_closed(double d, double e) {
  d = std::abs(d);
  return 0.5 * (std::pow(std::abs(d - 1.0), e) + std::pow(d + 1.0, e)) -
         0.5 * (power_antiderivative(d + 1.0, e) - power_antiderivative(d - 1.0, e));
}

double cross_series(double d, double e) {
  d = std::abs(d);
  double sum = 0.0;
  double binom = 1.0;
  double x = 1.0 / d;
  double pw = 1.0;
  for (int k = 1; k <= 30; ++k) {
    binom *= (e - (k - 1)) / k;
    pw *= x;
    if (k % 2 == 0) {
      double term = binom * pw * k / (k + 1);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
  }
  return std::pow(d, e) * sum;
}

double like_unit(double d, double e) { return std::abs(d) < kSeriesCutoff ? like_closed(d, e) : like_series(d, e); }
double cross_unit(double d, double e) { return std::abs(d) < kSeriesCutoff ? cross_closed(d, e) : cross_series(d, e); }

}  // namespace

void Lattice::validate() const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ValidationError("lattice delta must be positive");
  if (n_levels < 1) throw ValidationError("lattice needs at least one slab");
  if (half_width < 1) throw ValidationError("lattice needs at least three sites");
}

int Lattice::levels_for(double delta, double t) {
  double r = t / delta;
  long k = std::lround(r);
  if (k < 1 || std::abs(r - static_cast<double>(k)) > 1e-9 * std::max(1.0, r)) {
    std::ostringstream msg;
    msg << "time " << t << " is not a positive multiple of delta = " << delta;
    throw ValidationError(msg.str());
  }
  return static_cast<int>(k);
}

Lattice Lattice::covering(double delta, double t, double reach) {
  Lattice L;
  L.delta = delta;
  L.n_levels = levels_for(delta, t);
  // Level k is exact on |j| <= half_width - k + 1; keep one spare cell.
  L.half_width = static_cast<int>(std::ceil(reach / delta - 1e-9)) + L.n_levels + 1;
  L.validate();
  return L;
}

double triangle_cov(KindPair kinds, long lag, double delta, const HurstParams& p) {
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  double e = p.two_h();
  double scale = std::pow(delta, e + 1.0);
  if (kinds == KindPair::up_down) return scale * cross_unit(2.0 * static_cast<double>(lag) + 1.0, e);
  return scale * like_unit(2.0 * static_cast<double>(lag), e);
}

double up_down_cov(long odd_offset, double delta, const HurstParams& p) {
  if (odd_offset % 2 == 0) throw ValidationError("up/down offsets are odd multiples of delta");
  double e = p.two_h();
  return std::pow(delta, e + 1.0) * cross_unit(static_cast<double>(odd_offset), e);
}

double CovTable::kappa(long odd_offset) const {
  long m = (std::abs(odd_offset) - 1) / 2;
  if (m > max_lag) throw ValidationError("covariance table does not reach the requested lag");
  return ud[static_cast<std::size_t>(m)];
}

CovTable build_cov_table(double delta, const HurstParams& p, long max_lag) {
  if (max_lag < 0) throw ValidationError("max_lag must be nonnegative");
  if (!(delta > 0.0)) throw ValidationError("delta must be positive");
  CovTable t;
  t.params = p;
  t.delta = delta;
  t.max_lag = max_lag;
  t.analytic = true;
  auto n = static_cast<std::size_t>(max_lag + 1);
  t.uu.resize(n);
  t.ud.resize(n);
  for (std::size_t m = 0; m < n; ++m) {
    t.uu[m] = triangle_cov(KindPair::up_up, static_cast<long>(m), delta, p);
    t.ud[m] = triangle_cov(KindPair::up_down, static_cast<long>(m), delta, p);
  }
  t.dd = t.uu;
  double e = p.two_h();
  double r1 = std::abs(like_closed(kSeriesCutoff, e) - like_series(kSeriesCutoff, e)) / std::abs(like_series(kSeriesCutoff, e));
  double r2 =
      std::abs(cross_closed(kSeriesCutoff + 1, e) - cross_series(kSeriesCutoff + 1, e)) / std::abs(cross_series(kSeriesCutoff + 1, e));
  t.tolerance = std::max(r1, r2);
  return t;
}

CovTable build_cov_table(const Lattice& lattice, const HurstParams& p, long max_lag) {
  lattice.validate();
  if (max_lag < (lattice.j_max() - lattice.j_min()) / 2) {
    throw ValidationError("max_lag must cover the lattice width");
  }
  return build_cov_table(lattice.delta, p, max_lag);
}

// ---------------------------------------------------------------------------
// Circulant embedding

struct SlabSampler::Plans {
  detail::Plan backward;
  detail::FftwBuffer<fftw_complex> proto;
};

SlabSampler::Workspace::Workspace(int n)
    : w1_(reinterpret_cast<double*>(fftw_alloc_complex(static_cast<std::size_t>(n)))),
      w2_(reinterpret_cast<double*>(fftw_alloc_complex(static_cast<std::size_t>(n)))) {}

SlabSampler::Workspace::~Workspace() {
  fftw_free(w1_);
  fftw_free(w2_);
}

namespace {

int pairs_for(const Lattice& L) { return L.half_width + 2; }

// First up-triangle index of the pair sequence for slab `level`.
int first_up(const Lattice& L, int level) {
  int a = L.j_min() - 1;
  if (kind_at(level, a) != TriangleKind::up) ++a;
  return a;
}

}  // namespace

SlabSampler::SlabSampler(const CovTable& table_in, const Lattice& lattice) : lattice_(lattice) {
  lattice.validate();
  const int n_pairs = pairs_for(lattice);
  int N = 16;
  while (N < 2 * n_pairs) N *= 2;
  const int N_limit = 64 * N;

  CovTable table = table_in;
  for (;; N *= 2) {
    if (N > N_limit) {
      throw ConfigError("circulant embedding failed: negative eigenvalues persist up to embedding size " +
                        std::to_string(N_limit) + "; use a larger embedding circle or a narrower lattice");
    }
    long need = N / 2 + 1;
    if (table.max_lag < need) {
      if (!table.analytic) throw ValidationError("injected covariance table is too short for the embedding");
      table = build_cov_table(table.delta, table.params, need);
    }
    // Row = component at i+m, column = component at i.
    auto c_like = [&](long m, const std::vector<double>& v) { return v[static_cast<std::size_t>(std::abs(m))]; };
    auto kap = [&](long d) { return table.ud[static_cast<std::size_t>((std::abs(d) - 1) / 2)]; };

    auto buf = detail::alloc_complex(static_cast<std::size_t>(N));
    auto out11 = detail::alloc_complex(static_cast<std::size_t>(N));
    auto out22 = detail::alloc_complex(static_cast<std::size_t>(N));
    auto out12 = detail::alloc_complex(static_cast<std::size_t>(N));
    detail::Plan fwd = detail::plan_c2c(N, buf.get(), out11.get(), FFTW_FORWARD);
    auto transform = [&](auto&& fill, fftw_complex* out) {
      for (int m = 0; m < N; ++m) {
        buf[m][0] = fill(m);
        buf[m][1] = 0.0;
      }
      fftw_execute_dft(fwd.get(), buf.get(), out);
    };
    auto wrap = [&](int m) { return m <= N / 2 ? static_cast<long>(m) : static_cast<long>(m) - N; };
    transform([&](int m) { return c_like(wrap(m), table.uu); }, out11.get());
    transform([&](int m) { return c_like(wrap(m), table.dd); }, out22.get());
    // c12(m) = E[U_{i+m} D_i] = kappa(2m - 1); symmetrized at N/2.
    transform(
        [&](int m) {
          if (m == N / 2) return 0.5 * (kap(N - 1) + kap(N + 1));
          return kap(2 * wrap(m) - 1);
        },
        out12.get());

    std::vector<double> lam_min(static_cast<std::size_t>(N));
    std::vector<double> lam_max(static_cast<std::size_t>(N));
    double top = 0.0;
    double low = 0.0;
    for (int f = 0; f < N; ++f) {
      double p = out11[f][0];
      double r = out22[f][0];
      std::complex<double> q(out12[f][0], out12[f][1]);
      double mean = 0.5 * (p + r);
      double rad = std::hypot(0.5 * (p - r), std::abs(q));
      lam_max[static_cast<std::size_t>(f)] = mean + rad;
      lam_min[static_cast<std::size_t>(f)] = mean - rad;
      top = std::max(top, mean + rad);
      low = std::min(low, mean - rad);
    }
    min_eigen_ratio_ = top > 0.0 ? low / top : 0.0;
    if (top > 0.0 && low < -1e-8 * top) continue;

    n_embed_ = N;
    a11_.assign(static_cast<std::size_t>(N), 0.0);
    a12_.assign(static_cast<std::size_t>(N), 0.0);
    a21_.assign(static_cast<std::size_t>(N), 0.0);
    a22_.assign(static_cast<std::size_t>(N), 0.0);
    for (int f = 0; f < N; ++f) {
      auto fi = static_cast<std::size_t>(f);
      double p = out11[f][0];
      double r = out22[f][0];
      std::complex<double> q(out12[f][0], out12[f][1]);
      double lp = std::max(lam_max[fi], 0.0);
      double lm = std::max(lam_min[fi], 0.0);
      double rad = 0.5 * (lam_max[fi] - lam_min[fi]);
      if (rad <= 1e-300) {
        double s = std::sqrt(std::max(0.5 * (p + r), 0.0));
        a11_[fi] = s;
        a22_[fi] = s;
        continue;
      }
      // sqrt(M) = [sqrt(l+) (M - l- I) + sqrt(l-) (l+ I - M)] / (l+ - l-)
      double sp = std::sqrt(lp);
      double sm = std::sqrt(lm);
      double den = 2.0 * rad;
      a11_[fi] = (sp * (p - lam_min[fi]) + sm * (lam_max[fi] - p)) / den;
      a22_[fi] = (sp * (r - lam_min[fi]) + sm * (lam_max[fi] - r)) / den;
      a12_[fi] = (sp - sm) * q / den;
      a21_[fi] = std::conj(a12_[fi]);
    }
    break;
  }

  plans_ = std::make_unique<Plans>();
  plans_->proto = detail::alloc_complex(static_cast<std::size_t>(n_embed_));
  plans_->backward = detail::plan_c2c(n_embed_, plans_->proto.get(), plans_->proto.get(), FFTW_BACKWARD);
}

SlabSampler::~SlabSampler() = default;

std::unique_ptr<SlabSampler::Workspace> SlabSampler::make_workspace() const {
  return std::make_unique<Workspace>(n_embed_);
}

NoiseSlab SlabSampler::zero(int level) const {
  NoiseSlab s;
  s.level = level;
  s.j_lo = lattice_.j_min();
  s.values.assign(static_cast<std::size_t>(lattice_.width()), 0.0);
  return s;
}

NoiseSlab SlabSampler::sample(int level, Engine& rng, Workspace& ws) const {
  const int N = n_embed_;
  auto& nd = ws.normal_;
  nd.reset();
  auto* w1p = reinterpret_cast<fftw_complex*>(ws.w1_);
  auto* w2p = reinterpret_cast<fftw_complex*>(ws.w2_);
  for (int f = 0; f < N; ++f) {
    auto fi = static_cast<std::size_t>(f);
    std::complex<double> z1(nd(rng), nd(rng));
    std::complex<double> z2(nd(rng), nd(rng));
    std::complex<double> w1 = a11_[fi] * z1 + a12_[fi] * z2;
    std::complex<double> w2 = a21_[fi] * z1 + a22_[fi] * z2;
    w1p[f][0] = w1.real();
    w1p[f][1] = w1.imag();
    w2p[f][0] = w2.real();
    w2p[f][1] = w2.imag();
  }
  fftw_execute_dft(plans_->backward.get(), w1p, w1p);
  fftw_execute_dft(plans_->backward.get(), w2p, w2p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(N));

  NoiseSlab s = zero(level);
  const int a = first_up(lattice_, level);
  for (int j = lattice_.j_min(); j <= lattice_.j_max(); ++j) {
    int off = j - a;
    int i = off / 2;
    double v = (off % 2 == 0) ? w1p[i][0] : w2p[i][0];
    s.at(j) = v * scale;
  }
  return s;
}

NoiseSlab sample_slab(const SlabSampler& sampler, int level, std::uint64_t master, std::uint64_t replica,
                      SlabSampler::Workspace& ws) {
  std::uint64_t seed = derive_seed(master, replica, static_cast<std::uint64_t>(level));
  Engine rng(seed);
  NoiseSlab s = sampler.sample(level, rng, ws);
  s.seed = seed;
  return s;
}

// ---------------------------------------------------------------------------
// Cameron-Martin weights

double triangle_cell_pairing(TriangleKind kind, double t_k, double center, double delta, const Cell& cell,
                             const HurstParams& p, Pairing pairing) {
  double lo = std::max(t_k, cell.s0);
  double hi = std::min(t_k + delta, cell.s1);
  if (!(hi > lo) || !(cell.y1 > cell.y0)) return 0.0;
  double len = hi - lo;
  // Half-width w(s) = wa + slope * (s - lo).
  double slope = (kind == TriangleKind::up) ? -1.0 : 1.0;
  double wa = (kind == TriangleKind::up) ? (t_k + delta - lo) : (lo - t_k);
  const double c = center;

  if (pairing == Pairing::hilbert) {
    double e = p.two_h();
    auto term = [&](double A, double sign) {
      return frachilbert::linear_power_integral(A + sign * wa, sign * slope, len, e);
    };
    return 0.5 * (term(c - cell.y0, 1.0) + term(c - cell.y1, -1.0) - term(c - cell.y0, -1.0) - term(c - cell.y1, 1.0));
  }

  // Overlap length is piecewise linear in s; split at its kinks.
  std::vector<double> cuts{lo, hi};
  for (double wstar : {cell.y1 - c, c - cell.y0, cell.y0 - c, c - cell.y1}) {
    double s = lo + (wstar - wa) / slope;
    if (s > lo && s < hi) cuts.push_back(s);
  }
  std::sort(cuts.begin(), cuts.end());
  auto overlap = [&](double s) {
    double w = wa + slope * (s - lo);
    return std::max(0.0, std::min(c + w, cell.y1) - std::max(c - w, cell.y0));
  };
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    double a = cuts[i];
    double b = cuts[i + 1];
    area += (b - a) * overlap(0.5 * (a + b));
  }
  return area;
}

std::vector<NoiseSlab> cm_shift_weights(const Cell& cell, const Lattice& lattice, const HurstParams& p,
                                        Pairing pairing) {
  lattice.validate();
  if (cell.s0 > cell.s1 || cell.y0 > cell.y1) throw ValidationError("cell bounds are inverted");
  if (cell.y0 < lattice.x_min() || cell.y1 > lattice.x_max() || cell.s0 < 0.0) {
    throw ValidationError("cell lies outside the lattice extent");
  }
  std::vector<NoiseSlab> out;
  out.reserve(static_cast<std::size_t>(lattice.n_levels));
  for (int k = 0; k < lattice.n_levels; ++k) {
    NoiseSlab s;
    s.level = k;
    s.j_lo = lattice.j_min();
    s.values.assign(static_cast<std::size_t>(lattice.width()), 0.0);
    double tk = lattice.time(k);
    if (tk < cell.s1 && tk + lattice.delta > cell.s0) {
      for (int j = lattice.j_min(); j <= lattice.j_max(); ++j) {
        s.at(j) = triangle_cell_pairing(kind_at(k, j), tk, lattice.x(j), lattice.delta, cell, p, pairing);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Binary cache: "RWCOVTAB", u32 version, f64 H, f64 delta, u64 max_lag,
// f64 tolerance, then uu, ud, dd as f64 arrays of max_lag+1 entries. Little-endian.

namespace {

constexpr char kMagic[8] = {'R', 'W', 'C', 'O', 'V', 'T', 'A', 'B'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("covariance table file is truncated");
  unsigned char b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void write_cov_table(const std::filesystem::path& path, const CovTable& t) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<double>(out, t.params.H());
  put<double>(out, t.delta);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(t.max_lag));
  put<double>(out, t.tolerance);
  for (const auto* v : {&t.uu, &t.ud, &t.dd}) {
    for (double x : *v) put<double>(out, x);
  }
  io::atomic_write(path, out);
}

CovTable read_cov_table(const std::filesystem::path& path) {
  std::string in = io::read_file(path);
  if (in.size() < sizeof(kMagic) || std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a covariance table file: " + path.string());
  }
  std::size_t pos = sizeof(kMagic);
  auto version = get<std::uint32_t>(in, pos);
  if (version != kVersion) throw IoError("unsupported covariance table version " + std::to_string(version));
  CovTable t;
  t.params = HurstParams::reference(get<double>(in, pos));
  t.delta = get<double>(in, pos);
  t.max_lag = static_cast<long>(get<std::uint64_t>(in, pos));
  t.tolerance = get<double>(in, pos);
  auto n = static_cast<std::size_t>(t.max_lag + 1);
  for (auto* v : {&t.uu, &t.ud, &t.dd}) {
    v->resize(n);
    for (auto& x : *v) x = get<double>(in, pos);
  }
  t.analytic = true;
  return t;
}

}  // namespace roughwave::noise
