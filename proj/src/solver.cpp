#include "roughwave/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <nlohmann/json.hpp>

#include "roughwave/errors.hpp"
#include "roughwave/io.hpp"

namespace roughwave::solver {

double wave_kernel(double t, double x) { return (t > 0.0 && std::abs(x) < t) ? 0.5 : 0.0; }

namespace {

Field make_field(int level, int lo, int hi, double value) {
  Field f;
  f.level = level;
  f.j_first = lo;
  if (((lo - level) % 2 + 2) % 2 != 0) ++f.j_first;
  int n = (hi >= f.j_first) ? (hi - f.j_first) / 2 + 1 : 0;
  f.values.assign(static_cast<std::size_t>(n), value);
  return f;
}

double shifted_mass(const NoiseSlab& slab, int j, const Shift* shift) {
  double w = slab.at(j);
  if (shift && shift->weights && shift->eps != 0.0) {
    w += shift->eps * (*shift->weights)[static_cast<std::size_t>(slab.level)].at(j);
  }
  return w;
}

bool in_slab(const NoiseSlab& s, int j) {
  return j >= s.j_lo && j < s.j_lo + static_cast<int>(s.values.size());
}

Field initial_field(const Lattice& L) { return make_field(0, L.j_min() - 1, L.j_max() + 1, 1.0); }

}  // namespace

Field first_step(const Field& u0, const NoiseSlab& upper, const Shift* shift) {
  if (u0.level != 0 || upper.level != 0) throw ValidationError("first step needs level 0 data and slab 0");
  int lo = std::max(u0.j_first + 1, upper.j_lo);
  int hi = std::min(u0.j_last() - 1, upper.j_lo + static_cast<int>(upper.values.size()) - 1);
  Field next = make_field(1, lo, hi, 0.0);
  for (std::size_t i = 0; i < next.values.size(); ++i) {
    int j = next.j_first + 2 * static_cast<int>(i);
    double avg = 0.5 * (u0.at(j - 1) + u0.at(j + 1));
    next.values[i] = avg + 0.5 * avg * shifted_mass(upper, j, shift);
  }
  return next;
}

Field step(const SchemeState& s, const NoiseSlab& lower, const NoiseSlab& upper, const Shift* shift) {
  const int k = s.cur.level;
  if (s.prev.level != k - 1 || lower.level != k - 1 || upper.level != k) {
    throw ValidationError("parity mismatch: step needs levels (k-1, k) and slabs (k-1, k)");
  }
  if (((s.cur.j_first - k) % 2 + 2) % 2 != 0 || ((s.prev.j_first - k + 1) % 2 + 2) % 2 != 0) {
    throw ValidationError("parity mismatch: field sites do not match their level");
  }
  int lo = s.cur.j_first + 1;
  int hi = s.cur.j_last() - 1;
  lo = std::max({lo, s.prev.j_first, lower.j_lo, upper.j_lo});
  hi = std::min({hi, s.prev.j_last(), lower.j_lo + static_cast<int>(lower.values.size()) - 1,
                 upper.j_lo + static_cast<int>(upper.values.size()) - 1});
  Field next = make_field(k + 1, lo, hi, 0.0);
  for (std::size_t i = 0; i < next.values.size(); ++i) {
    int j = next.j_first + 2 * static_cast<int>(i);
    double left = s.cur.at(j - 1);
    double right = s.cur.at(j + 1);
    double back = s.prev.at(j);
    double noise_part = back * shifted_mass(lower, j, shift) + 0.5 * (left + right) * shifted_mass(upper, j, shift);
    next.values[i] = left + right - back + 0.5 * noise_part;
  }
  return next;
}

const Field& SpaceTimeField::level(int k) const {
  if (mode == MemoryMode::full) {
    int idx = k - first_level;
    if (idx < 0 || idx >= static_cast<int>(levels.size())) throw ValidationError("level not retained");
    return levels[static_cast<std::size_t>(idx)];
  }
  for (const auto& f : levels) {
    if (f.level == k) return f;
  }
  throw ValidationError("level not retained in ring-buffer mode");
}

namespace {

template <class GetSlab>
SpaceTimeField evolve(const Lattice& L, GetSlab&& get_slab, const SolveOptions& o) {
  L.validate();
  SpaceTimeField out;
  out.lattice = L;
  out.mode = o.memory;
  out.first_level = 0;

  auto emit = [&](Field&& f) {
    if (o.on_level) o.on_level(f);
    if (o.memory == MemoryMode::ring && out.levels.size() == 2) out.levels.erase(out.levels.begin());
    out.levels.push_back(std::move(f));
  };

  emit(initial_field(L));
  NoiseSlab lower = get_slab(0);
  emit(first_step(out.levels.back(), lower, o.shift));
  for (int k = 1; k < L.n_levels; ++k) {
    NoiseSlab upper = get_slab(k);
    const auto n = out.levels.size();
    SchemeState st{out.levels[n - 2], out.levels[n - 1], k};
    Field next = step(st, lower, upper, o.shift);
    emit(std::move(next));
    lower = std::move(upper);
  }
  if (o.memory == MemoryMode::ring) out.first_level = out.levels.front().level;
  return out;
}

}  // namespace

SpaceTimeField solve_u(const Lattice& lattice, const std::vector<NoiseSlab>& slabs, const SolveOptions& opts) {
  if (static_cast<int>(slabs.size()) < lattice.n_levels) throw ValidationError("not enough noise slabs for the lattice");
  return evolve(lattice, [&](int k) { return slabs[static_cast<std::size_t>(k)]; }, opts);
}

SpaceTimeField solve_u(const Lattice& lattice, const noise::SlabSampler& sampler, std::uint64_t master,
                       std::uint64_t replica, noise::SlabSampler::Workspace& ws, const SolveOptions& opts) {
  return evolve(lattice, [&](int k) { return noise::sample_slab(sampler, k, master, replica, ws); }, opts);
}

std::vector<NoiseSlab> draw_noise(const noise::SlabSampler& sampler, std::uint64_t master, std::uint64_t replica,
                                  noise::SlabSampler::Workspace& ws) {
  std::vector<NoiseSlab> out;
  for (int k = 0; k < sampler.lattice().n_levels; ++k) out.push_back(noise::sample_slab(sampler, k, master, replica, ws));
  return out;
}

std::vector<NoiseSlab> zero_noise(const Lattice& lattice) {
  std::vector<NoiseSlab> out;
  for (int k = 0; k < lattice.n_levels; ++k) {
    NoiseSlab s;
    s.level = k;
    s.j_lo = lattice.j_min();
    s.values.assign(static_cast<std::size_t>(lattice.width()), 0.0);
    out.push_back(std::move(s));
  }
  return out;
}

SpaceTimeField solve_v(int r, int z, const Lattice& L, const std::vector<NoiseSlab>& slabs, double amplitude) {
  L.validate();
  if (r < 0 || r >= L.n_levels) throw ValidationError("v start level is off the lattice");
  if (((z - r - 1) % 2 + 2) % 2 != 0 || z < L.j_min() || z > L.j_max()) {
    throw ValidationError("v start site is off the parity-compatible site set");
  }
  if (static_cast<int>(slabs.size()) < L.n_levels) throw ValidationError("not enough noise slabs for the lattice");
  SpaceTimeField out;
  out.lattice = L;
  out.mode = MemoryMode::full;
  out.first_level = r;
  out.levels.push_back(make_field(r, L.j_min() - 1, L.j_max() + 1, 0.0));
  Field start = make_field(r + 1, L.j_min(), L.j_max(), 0.0);
  start.at(z) = amplitude;
  out.levels.push_back(std::move(start));
  for (int k = r + 1; k < L.n_levels; ++k) {
    const auto n = out.levels.size();
    SchemeState st{out.levels[n - 2], out.levels[n - 1], k};
    out.levels.push_back(step(st, slabs[static_cast<std::size_t>(k - 1)], slabs[static_cast<std::size_t>(k)]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference Duhamel solver

ReferenceSolver::ReferenceSolver(const ReferenceConfig& cfg) : cfg_(cfg) {
  if (cfg.n_sites < 2 || cfg.n_sites > 64 || cfg.n_levels < 1 || cfg.n_levels > 64) {
    throw ValidationError("reference solver is limited to 64 sites and 64 levels");
  }
  if (!(cfg.delta > 0.0)) throw ValidationError("delta must be positive");
  const int n = cfg.n_sites;
  const double h = cfg.delta;
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i) {
    for (int l = 0; l < n; ++l) {
      double a = (i - 0.5) * h;
      double c = (l - 0.5) * h;
      cov(i, l) = h * frachilbert::increment_cov(a, a + h, c, c + h, cfg.params);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("rectangle-cell covariance is not positive definite");
  Eigen::MatrixXd Lf = llt.matrixL();
  chol_.resize(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < n; ++l) chol_[static_cast<std::size_t>(i * n + l)] = Lf(i, l);
}

ReferenceField ReferenceSolver::solve(Engine& rng, bool zero) const {
  const int n = cfg_.n_sites;
  const int K = cfg_.n_levels;
  ReferenceField out;
  out.config = cfg_;
  out.u.assign(static_cast<std::size_t>(K + 1), std::vector<double>(static_cast<std::size_t>(n), 1.0));
  std::normal_distribution<double> nd;
  std::vector<double> z(static_cast<std::size_t>(n));
  // prefix[m][i] = sum_{l < i} u_m(y_l) dW_{m,l}
  std::vector<std::vector<double>> prefix;
  for (int k = 0; k < K; ++k) {
    for (auto& v : z) v = zero ? 0.0 : nd(rng);
    std::vector<double> pre(static_cast<std::size_t>(n + 1), 0.0);
    for (int i = 0; i < n; ++i) {
      double dw = 0.0;
      for (int l = 0; l <= i; ++l) dw += chol_[static_cast<std::size_t>(i * n + l)] * z[static_cast<std::size_t>(l)];
      pre[static_cast<std::size_t>(i + 1)] = pre[static_cast<std::size_t>(i)] + out.u[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] * dw;
    }
    prefix.push_back(std::move(pre));
    // Kernel G_{t_{k+1} - t_{m+1/2}} covers |i - j| <= k - m.
    for (int j = 0; j < n; ++j) {
      double acc = 1.0;
      for (int m = 0; m <= k; ++m) {
        int lo = std::max(0, j - (k - m));
        int hi = std::min(n - 1, j + (k - m));
        const auto& p = prefix[static_cast<std::size_t>(m)];
        acc += 0.5 * (p[static_cast<std::size_t>(hi + 1)] - p[static_cast<std::size_t>(lo)]);
      }
      out.u[static_cast<std::size_t>(k + 1)][static_cast<std::size_t>(j)] = acc;
    }
  }
  return out;
}

ReferenceField reference_solve_u(const ReferenceConfig& cfg, Engine& rng) { return ReferenceSolver(cfg).solve(rng); }

// ---------------------------------------------------------------------------
// Malliavin finite-difference check

MalliavinResult malliavin_fd_check(double t, double x, const noise::Cell& cell, const MalliavinConfig& cfg) {
  noise::CovTable table = noise::build_cov_table(cfg.lattice, cfg.params, cfg.lattice.half_width + 1);
  noise::SlabSampler sampler(table, cfg.lattice);
  auto ws = sampler.make_workspace();
  auto slabs = draw_noise(sampler, cfg.master, cfg.replica, *ws);
  return malliavin_fd_check(t, x, cell, cfg, slabs);
}

MalliavinResult malliavin_fd_check(double t, double x, const noise::Cell& cell, const MalliavinConfig& cfg,
                                   const std::vector<NoiseSlab>& slabs) {
  const Lattice& L = cfg.lattice;
  const int K = Lattice::levels_for(L.delta, t);
  if (K > L.n_levels) throw ValidationError("t lies beyond the lattice horizon");
  double xr = x / L.delta;
  int jx = static_cast<int>(std::lround(xr));
  if (std::abs(xr - jx) > 1e-9 || ((jx - K) % 2 + 2) % 2 != 0) {
    throw ValidationError("x is not a site of the level at time t");
  }
  if (!(cfg.eps > 0.0)) throw ValidationError("eps must be positive");

  Lattice Lt = L;
  Lt.n_levels = K;
  auto weights = noise::cm_shift_weights(cell, Lt, cfg.params, cfg.pairing);
  std::vector<NoiseSlab> frozen(slabs.begin(), slabs.begin() + K);

  SolveOptions full;
  full.memory = MemoryMode::full;
  SpaceTimeField base = solve_u(Lt, frozen, full);
  const Field& top = base.level(K);
  if (!top.contains(jx)) throw ValidationError("(t, x) lies outside the exact region of the lattice");

  auto shifted_value = [&](double eps) {
    Shift sh{eps, &weights};
    SolveOptions o;
    o.shift = &sh;
    SpaceTimeField f = solve_u(Lt, frozen, o);
    return f.level(K).at(jx);
  };
  const double u0 = top.at(jx);
  MalliavinResult res;
  res.lhs = (shifted_value(cfg.eps) - u0) / cfg.eps;
  res.lhs_half = (shifted_value(0.5 * cfg.eps) - u0) / (0.5 * cfg.eps);
  double scale = std::max({std::abs(res.lhs), std::abs(res.lhs_half), 1e-300});
  if (std::abs(res.lhs - res.lhs_half) > cfg.halving_tol * scale && std::abs(res.lhs - res.lhs_half) > 1e-10) {
    throw NumericError("eps too large: finite differences at eps and eps/2 disagree (" + std::to_string(res.lhs) +
                           " vs " + std::to_string(res.lhs_half) + ")",
                       std::abs(res.lhs - res.lhs_half) / scale);
  }

  // Derivative of u(t, x) in the shift direction: each step injects
  // (1/2) * eps * coeff at (k+1, j), which propagates as 2 v^{(k,j)}.
  double rhs = 0.0;
  for (int k = 0; k < K; ++k) {
    const Field& uk = base.level(k);
    const Field* ukm1 = (k >= 1) ? &base.level(k - 1) : nullptr;
    const NoiseSlab& qu = weights[static_cast<std::size_t>(k)];
    const NoiseSlab* qd = (k >= 1) ? &weights[static_cast<std::size_t>(k - 1)] : nullptr;
    int reach = K - k - 1;  // sites at level k+1 that can still reach jx
    for (int j = jx - reach; j <= jx + reach; j += 2) {
      if (j < L.j_min() || j > L.j_max()) continue;
      double coeff = 0.0;
      if (in_slab(qu, j) && qu.at(j) != 0.0) coeff += 0.5 * (uk.at(j - 1) + uk.at(j + 1)) * qu.at(j);
      if (qd && ukm1 && in_slab(*qd, j) && qd->at(j) != 0.0) coeff += ukm1->at(j) * qd->at(j);
      if (coeff == 0.0) continue;
      SpaceTimeField v = solve_v(k, j, Lt, frozen);
      ++res.v_solves;
      const Field& vt = v.level(K);
      if (vt.contains(jx)) rhs += coeff * vt.at(jx);
    }
  }
  res.rhs = rhs;
  double den = std::max(std::abs(res.lhs), std::abs(res.rhs));
  res.rel_err = den > 0.0 ? std::abs(res.lhs - res.rhs) / den : 0.0;
  return res;
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
void put(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const SpaceTimeField& field, double H, std::uint64_t master,
                      std::uint64_t replica) {
  std::string out("RWTRAJ01", 8);
  put<std::uint32_t>(out, 1);
  put<double>(out, field.lattice.delta);
  put<std::int32_t>(out, field.lattice.n_levels);
  put<std::int32_t>(out, field.lattice.half_width);
  put<double>(out, H);
  put<std::uint64_t>(out, master);
  put<std::uint64_t>(out, replica);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(field.levels.size()));
  for (const auto& f : field.levels) {
    put<std::int32_t>(out, f.level);
    put<std::int32_t>(out, f.j_first);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(f.values.size()));
    for (double v : f.values) put<double>(out, v);
  }
  io::atomic_write(path, out);

  nlohmann::json side;
  side["format"] = "RWTRAJ01";
  side["version"] = 1;
  side["byte_order"] = "little";
  side["delta"] = field.lattice.delta;
  side["n_levels"] = field.lattice.n_levels;
  side["half_width"] = field.lattice.half_width;
  side["H"] = H;
  side["master_seed"] = master;
  side["replica"] = replica;
  side["memory_mode"] = field.mode == MemoryMode::full ? "full" : "ring";
  side["levels_stored"] = field.levels.size();
  side["site_rule"] = "x_j = j * delta; level k holds j = j_first + 2i";
  side["seed_lineage"] = kSeedLineage;
  std::filesystem::path sp = path;
  sp += ".json";
  io::atomic_write(sp, side.dump(2) + "\n");
}

}  // namespace roughwave::solver
