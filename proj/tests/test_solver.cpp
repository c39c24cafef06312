#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "roughwave/errors.hpp"
#include "roughwave/io.hpp"
#include "roughwave/solver.hpp"

using namespace roughwave;
using namespace roughwave::solver;

namespace {
const HurstParams P = frachilbert::make_params(0.35);

struct Rig {
  Lattice L;
  noise::CovTable table;
  std::unique_ptr<noise::SlabSampler> sampler;
  std::unique_ptr<noise::SlabSampler::Workspace> ws;
  explicit Rig(Lattice lat) : L(lat), table(noise::build_cov_table(L, P, 2 * L.width() + 8)) {
    sampler = std::make_unique<noise::SlabSampler>(table, L);
    ws = sampler->make_workspace();
  }
};
}  // namespace

TEST(WaveKernel, HalfIndicator) {
  EXPECT_EQ(wave_kernel(1.0, 0.5), 0.5);
  EXPECT_EQ(wave_kernel(1.0, 1.5), 0.0);
}

TEST(Solver, ZeroNoiseKeepsOne) {
  Lattice L = Lattice::covering(0.1, 1.0, 1.0);
  SolveOptions o;
  o.memory = MemoryMode::full;
  auto f = solve_u(L, zero_noise(L), o);
  EXPECT_EQ(static_cast<int>(f.levels.size()), L.n_levels + 1);
  for (const auto& lv : f.levels)
    for (double v : lv.values) EXPECT_EQ(v, 1.0);
}

TEST(Solver, ZeroNoiseVelocityIsHalfCone) {
  Lattice L = Lattice::covering(0.1, 1.0, 1.0);
  const int r = 2, z = 3;
  auto v = solve_v(r, z, L, zero_noise(L));
  const auto& top = v.last();
  for (std::size_t i = 0; i < top.values.size(); ++i) {
    int j = top.j_first + 2 * static_cast<int>(i);
    double expect = std::abs(j - z) < L.n_levels - r ? 0.5 : 0.0;
    EXPECT_EQ(top.values[i], expect) << "j = " << j;
  }
  EXPECT_THROW(solve_v(r, z + 1, L, zero_noise(L)), ValidationError);
}

TEST(Solver, StreamingMatchesFrozenNoise) {
  Rig rig(Lattice::covering(0.1, 1.0, 2.0));
  auto slabs = draw_noise(*rig.sampler, 5, 9, *rig.ws);
  auto a = solve_u(rig.L, slabs);
  auto b = solve_u(rig.L, *rig.sampler, 5, 9, *rig.ws);
  EXPECT_EQ(a.last().values, b.last().values);
  EXPECT_EQ(a.last().level, rig.L.n_levels);
}

TEST(Solver, OnLevelCallbackSeesEveryLevel) {
  Rig rig(Lattice::covering(0.1, 0.5, 1.0));
  std::vector<int> seen;
  SolveOptions o;
  o.on_level = [&](const Field& f) { seen.push_back(f.level); };
  solve_u(rig.L, *rig.sampler, 1, 0, *rig.ws, o);
  ASSERT_EQ(static_cast<int>(seen.size()), rig.L.n_levels + 1);
  for (int k = 0; k <= rig.L.n_levels; ++k) EXPECT_EQ(seen[static_cast<std::size_t>(k)], k);
}

TEST(Solver, RingModeRejectsOldLevels) {
  Rig rig(Lattice::covering(0.1, 0.5, 1.0));
  auto f = solve_u(rig.L, *rig.sampler, 1, 0, *rig.ws);
  EXPECT_NO_THROW(f.level(rig.L.n_levels));
  EXPECT_THROW(f.level(0), ValidationError);
}

TEST(Solver, StepRejectsParityMismatch) {
  Lattice L = Lattice::covering(0.1, 0.5, 1.0);
  auto z = zero_noise(L);
  SolveOptions o;
  o.memory = MemoryMode::full;
  auto f = solve_u(L, z, o);
  SchemeState s{f.level(1), f.level(1), 0};
  EXPECT_THROW(step(s, z[1], z[2]), ValidationError);
}

TEST(Solver, NoisyVelocityStaysInCone) {
  Rig rig(Lattice::covering(0.1, 1.0, 1.0));
  auto slabs = draw_noise(*rig.sampler, 2, 0, *rig.ws);
  const int r = 1, z = 0;
  auto v = solve_v(r, z, rig.L, slabs);
  const auto& top = v.last();
  bool nonconstant = false;
  for (std::size_t i = 0; i < top.values.size(); ++i) {
    int j = top.j_first + 2 * static_cast<int>(i);
    if (std::abs(j - z) >= rig.L.n_levels - r) EXPECT_EQ(top.values[i], 0.0);
    else nonconstant = nonconstant || top.values[i] != 0.5;
  }
  EXPECT_TRUE(nonconstant);
}

TEST(Solver, MeanOneOnAverage) {
  Rig rig(Lattice::covering(0.1, 1.0, 0.2));
  const int M = 2000;
  double s = 0, q = 0;
  for (int r = 0; r < M; ++r) {
    double u = solve_u(rig.L, *rig.sampler, 3, static_cast<std::uint64_t>(r), *rig.ws).last().at(0);
    s += u;
    q += u * u;
  }
  double m = s / M;
  double se = std::sqrt((q / M - m * m) / M);
  EXPECT_NEAR(m, 1.0, 4.0 * se);
}

TEST(Reference, ZeroNoiseAndLimits) {
  ReferenceConfig c;
  c.delta = 0.125;
  c.n_levels = 8;
  c.n_sites = 32;
  c.params = P;
  ReferenceSolver ref(c);
  Engine rng(1);
  auto f = ref.solve(rng, true);
  for (const auto& row : f.u)
    for (double v : row) EXPECT_EQ(v, 1.0);
  c.n_sites = 65;
  EXPECT_THROW(ReferenceSolver{c}, ValidationError);
}

TEST(Malliavin, MatchesFiniteDifference) {
  MalliavinConfig mc;
  mc.lattice = Lattice::covering(0.25, 1.0, 2.0);
  mc.params = P;
  mc.master = 11;
  auto r = malliavin_fd_check(1.0, 0.0, {0.25, 0.5, -0.25, 0.25}, mc);
  EXPECT_GT(std::abs(r.lhs), 0.0);
  EXPECT_LT(r.rel_err, 1e-3);
  EXPECT_GT(r.v_solves, 0);
}

TEST(Malliavin, TrivialZeros) {
  MalliavinConfig mc;
  mc.lattice = Lattice::covering(0.25, 1.0, 2.0);
  mc.params = P;
  auto after = malliavin_fd_check(1.0, 0.0, {1.0, 1.5, -0.25, 0.25}, mc);
  EXPECT_EQ(after.lhs, 0.0);
  EXPECT_EQ(after.rhs, 0.0);
  auto outside = malliavin_fd_check(1.0, 0.0, {0.0, 0.25, 1.5, 1.75}, mc);
  EXPECT_EQ(outside.lhs, 0.0);
  EXPECT_EQ(outside.rhs, 0.0);
  EXPECT_THROW(malliavin_fd_check(1.0, 0.1, {0.0, 0.25, 0.0, 0.25}, mc), ValidationError);
}

TEST(Trajectory, HeaderAndSidecar) {
  Rig rig(Lattice::covering(0.1, 0.3, 0.5));
  SolveOptions o;
  o.memory = MemoryMode::full;
  auto f = solve_u(rig.L, *rig.sampler, 4, 0, *rig.ws, o);
  auto path = std::filesystem::temp_directory_path() / "roughwave_traj.bin";
  write_trajectory(path, f, 0.35, 4, 0);
  std::string bytes = io::read_file(path);
  EXPECT_EQ(bytes.substr(0, 8), "RWTRAJ01");
  double delta = 0.0;
  std::memcpy(&delta, bytes.data() + 12, 8);
  EXPECT_EQ(delta, 0.1);
  EXPECT_TRUE(std::filesystem::exists(path.string() + ".json"));
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}
