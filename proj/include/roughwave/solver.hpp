#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "roughwave/noise.hpp"

namespace roughwave::solver {

using frachilbert::HurstParams;
using noise::Lattice;
using noise::NoiseSlab;

double wave_kernel(double t, double x);

// Values of one level on the sites j_first, j_first + 2, ..., all of the
// level's parity.
struct Field {
  int level = 0;
  int j_first = 0;
  std::vector<double> values;

  int j_last() const { return j_first + 2 * (static_cast<int>(values.size()) - 1); }
  bool contains(int j) const {
    return !values.empty() && j >= j_first && j <= j_last() && ((j - j_first) % 2 == 0);
  }
  double at(int j) const { return values[static_cast<std::size_t>((j - j_first) / 2)]; }
  double& at(int j) { return values[static_cast<std::size_t>((j - j_first) / 2)]; }
};

struct SchemeState {
  Field prev;  // level k-1
  Field cur;   // level k
  int slabs_consumed = 0;
};

// Additive Cameron-Martin shift of the triangle masses: W -> W + eps * q.
struct Shift {
  double eps = 0.0;
  const std::vector<NoiseSlab>* weights = nullptr;  // indexed by slab level
};

// One leapfrog step from levels (k-1, k) to k+1:
//   u_{k+1}(j) = u_k(j+1) + u_k(j-1) - u_{k-1}(j)
//              + 1/2 [ u_{k-1}(j) * D_{k-1}(j) + 1/2 (u_k(j-1) + u_k(j+1)) * U_k(j) ]
// where D_{k-1}(j) is the down triangle of slab k-1 and U_k(j) the up triangle
// of slab k centred at x_j. Each half of the diamond is weighted by values that
// are already known when its noise arrives.
Field step(const SchemeState& state, const NoiseSlab& lower, const NoiseSlab& upper, const Shift* shift = nullptr);

// First level from constant data u_0 = 1 (upper half diamond only).
Field first_step(const Field& u0, const NoiseSlab& upper, const Shift* shift = nullptr);

enum class MemoryMode { ring, full };

struct SpaceTimeField {
  Lattice lattice;
  MemoryMode mode = MemoryMode::ring;
  int first_level = 0;        // level of levels[0]
  std::vector<Field> levels;  // full: every level from first_level; ring: last two

  const Field& last() const { return levels.back(); }
  const Field& level(int k) const;
};

struct SolveOptions {
  MemoryMode memory = MemoryMode::ring;
  const Shift* shift = nullptr;
  std::function<void(const Field&)> on_level;  // called for every level produced, including 0
};

// Evolution on frozen noise (one slab per level 0..n_levels-1).
SpaceTimeField solve_u(const Lattice& lattice, const std::vector<NoiseSlab>& slabs, const SolveOptions& opts = {});

// Streaming evolution; slabs are drawn from the (master, replica, level) streams.
SpaceTimeField solve_u(const Lattice& lattice, const noise::SlabSampler& sampler, std::uint64_t master,
                       std::uint64_t replica, noise::SlabSampler::Workspace& ws, const SolveOptions& opts = {});

std::vector<NoiseSlab> draw_noise(const noise::SlabSampler& sampler, std::uint64_t master, std::uint64_t replica,
                                  noise::SlabSampler::Workspace& ws);
std::vector<NoiseSlab> zero_noise(const Lattice& lattice);

// Delta-velocity solution started at level r: v = 0 at level r and
// amplitude * 1_{j = z} at level r + 1 (z must have parity r + 1).
SpaceTimeField solve_v(int r, int z, const Lattice& lattice, const std::vector<NoiseSlab>& slabs,
                       double amplitude = 0.5);

// Direct Duhamel sum on rectangle cells; an independent (slow) oracle.
struct ReferenceConfig {
  double delta = 0.125;
  int n_levels = 8;
  int n_sites = 64;  // sites y_i = (i - n_sites/2) * delta
  HurstParams params = HurstParams::reference(0.35);
};

struct ReferenceField {
  ReferenceConfig config;
  std::vector<std::vector<double>> u;  // u[level][site]
  double y(int i) const { return config.delta * (i - config.n_sites / 2); }
};

class ReferenceSolver {
 public:
  explicit ReferenceSolver(const ReferenceConfig& cfg);
  ReferenceField solve(Engine& rng, bool zero_noise = false) const;
  const ReferenceConfig& config() const { return cfg_; }

 private:
  ReferenceConfig cfg_;
  std::vector<double> chol_;  // lower-triangular factor, row-major n x n
};

ReferenceField reference_solve_u(const ReferenceConfig& cfg, Engine& rng);

struct MalliavinConfig {
  Lattice lattice;
  HurstParams params = HurstParams::reference(0.35);
  double eps = 1e-3;
  double halving_tol = 0.02;  // relative disagreement allowed between eps and eps/2
  noise::Pairing pairing = noise::Pairing::lebesgue;
  std::uint64_t master = 1;
  std::uint64_t replica = 0;
};

struct MalliavinResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double rel_err = 0.0;
  double lhs_half = 0.0;  // finite difference at eps/2
  int v_solves = 0;
};

MalliavinResult malliavin_fd_check(double t, double x, const noise::Cell& cell, const MalliavinConfig& cfg);

// Same check on caller-supplied frozen noise.
MalliavinResult malliavin_fd_check(double t, double x, const noise::Cell& cell, const MalliavinConfig& cfg,
                                   const std::vector<NoiseSlab>& slabs);

// Binary trajectory: "RWTRAJ01", u32 version, lattice (f64 delta, i32 n_levels,
// i32 half_width), f64 H, u64 master, u64 replica, u32 level count, then per
// level i32 level, i32 j_first, u32 n, n f64. A JSON sidecar describes it.
void write_trajectory(const std::filesystem::path& path, const SpaceTimeField& field, double H, std::uint64_t master,
                      std::uint64_t replica);

}  // namespace roughwave::solver
