#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "roughwave/errors.hpp"
#include "roughwave/noise.hpp"

using namespace roughwave;
using namespace roughwave::noise;

namespace {
const HurstParams P = frachilbert::make_params(0.35);

Lattice small_lattice(double delta = 0.1, int levels = 4, int hw = 30) {
  Lattice L;
  L.delta = delta;
  L.n_levels = levels;
  L.half_width = hw;
  return L;
}
}  // namespace

TEST(Lattice, CoveringAndLevels) {
  EXPECT_EQ(Lattice::levels_for(0.05, 1.0), 20);
  EXPECT_THROW(Lattice::levels_for(0.3, 1.0), ValidationError);
  auto L = Lattice::covering(0.1, 1.0, 5.0);
  EXPECT_EQ(L.n_levels, 10);
  // The top level reaches past the averaging window by at least one cell.
  EXPECT_GE(L.x(L.half_width - L.n_levels + 1), 5.0);
}

TEST(TriangleCov, LagZeroClosedForm) {
  double v = triangle_cov(KindPair::up_up, 0, 0.1, P);
  EXPECT_NEAR(v, 0.019066, 1e-6);  // quoted value is truncated; exact is 0.01906655
  EXPECT_NEAR(v, std::pow(2.0, 0.7) * std::pow(0.1, 1.7) / 1.7, 1e-10 * v);
  EXPECT_NEAR(triangle_cov(KindPair::down_down, 0, 0.1, P), v, 1e-10 * v);
}

TEST(TriangleCov, SignsAndBrownianLimit) {
  EXPECT_LT(triangle_cov(KindPair::up_up, 1, 0.1, P), 0.0);
  auto brown = HurstParams::reference(0.5);
  EXPECT_NEAR(triangle_cov(KindPair::up_up, 1, 0.1, brown), 0.0, 1e-15);
  EXPECT_NEAR(triangle_cov(KindPair::down_down, 3, 0.1, brown), 0.0, 1e-15);
  // An up triangle and a down triangle never share cross-section interiors.
  EXPECT_NEAR(triangle_cov(KindPair::up_down, 0, 0.1, brown), 0.0, 1e-15);
}

TEST(CovTable, SymmetryAndTail) {
  auto L = small_lattice();
  auto t = build_cov_table(L, P, 200);
  EXPECT_EQ(t.uu.size(), 201u);
  EXPECT_DOUBLE_EQ(t.uu[0], t.dd[0]);
  EXPECT_DOUBLE_EQ(t.kappa(3), t.kappa(-3));
  EXPECT_LT(t.tolerance, 1e-6);
  // Far lags decay like |lag|^{2H-2}.
  double r = t.uu[200] / t.uu[100];
  EXPECT_NEAR(r, std::pow(2.0, 0.7 - 2.0), 1e-3);
  EXPECT_THROW(build_cov_table(L, P, 5), ValidationError);
}

TEST(CovTable, BinaryRoundTrip) {
  auto path = std::filesystem::temp_directory_path() / "roughwave_test_cov.bin";
  auto t = build_cov_table(small_lattice(), P, 64);
  write_cov_table(path, t);
  auto u = read_cov_table(path);
  EXPECT_EQ(u.max_lag, t.max_lag);
  EXPECT_EQ(u.delta, t.delta);
  EXPECT_EQ(u.params.H(), t.params.H());
  EXPECT_EQ(u.uu, t.uu);
  EXPECT_EQ(u.ud, t.ud);
  EXPECT_EQ(u.dd, t.dd);
  std::filesystem::remove(path);
}

TEST(Sampler, DeterministicStreams) {
  auto L = small_lattice();
  SlabSampler s(build_cov_table(L, P, 2 * L.width() + 8), L);
  auto ws = s.make_workspace();
  auto a = sample_slab(s, 2, 17, 3, *ws);
  auto b = sample_slab(s, 2, 17, 3, *ws);
  auto c = sample_slab(s, 2, 17, 4, *ws);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  EXPECT_EQ(a.values.size(), static_cast<std::size_t>(L.width()));
  EXPECT_GE(s.min_eigen_ratio(), -1e-8);
}

TEST(Sampler, MeanAndCovarianceBands) {
  auto L = small_lattice(0.1, 1, 20);
  auto t = build_cov_table(L, P, 2 * L.width() + 8);
  SlabSampler s(t, L);
  auto ws = s.make_workspace();
  const int M = 4000;
  double m = 0, q = 0, c = 0, cq = 0;
  for (int r = 0; r < M; ++r) {
    auto slab = sample_slab(s, 0, 8, static_cast<std::uint64_t>(r), *ws);
    double x = slab.at(1), y = slab.at(3);  // two up triangles at lag 1
    m += x;
    q += x * x;
    c += x * y;
    cq += x * y * x * y;
  }
  m /= M;
  q /= M;
  c /= M;
  cq /= M;
  EXPECT_LT(std::abs(m), 4.0 * std::sqrt(q / M));
  EXPECT_NEAR(c, t.uu[1], 4.0 * std::sqrt((cq - c * c) / M));
}

TEST(Sampler, ZeroSlabAndIndependentLevels) {
  auto L = small_lattice();
  SlabSampler s(build_cov_table(L, P, 2 * L.width() + 8), L);
  auto z = s.zero(1);
  for (double v : z.values) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(kind_at(0, 0), TriangleKind::down);
  EXPECT_EQ(kind_at(0, 1), TriangleKind::up);
  EXPECT_EQ(kind_at(1, 0), TriangleKind::up);
}

TEST(ShiftWeights, TimeDisjointAndTranslation) {
  auto L = small_lattice(0.1, 6, 40);
  Cell cell{0.1, 0.2, -0.15, 0.05};
  auto w = cm_shift_weights(cell, L, P);
  for (double v : w[0].values) EXPECT_EQ(v, 0.0);  // slab (0, 0.1) meets the cell only on its edge
  for (double v : w[3].values) EXPECT_EQ(v, 0.0);
  double total = 0.0;
  for (double v : w[1].values) total += std::abs(v);
  EXPECT_GT(total, 0.0);
  // Translating the cell by 2 delta shifts the weights by two sites.
  Cell moved{0.1, 0.2, 0.05, 0.25};
  auto m = cm_shift_weights(moved, L, P);
  for (int j = L.j_min(); j + 2 <= L.j_max(); ++j) {
    EXPECT_NEAR(m[1].at(j + 2), w[1].at(j), 1e-14);
  }
  EXPECT_THROW(cm_shift_weights({0.0, 0.1, -10.0, 0.0}, L, P), ValidationError);
}

TEST(ShiftWeights, LebesguePairingIsOverlapArea) {
  auto L = small_lattice(0.1, 2, 20);
  // A cell covering the whole slab over a wide window: every interior
  // triangle is fully inside, so its weight is its area delta^2.
  Cell cell{0.0, 0.1, -1.0, 1.0};
  auto w = cm_shift_weights(cell, L, P, Pairing::lebesgue);
  EXPECT_NEAR(w[0].at(0), 0.01, 1e-14);
  EXPECT_NEAR(w[0].at(1), 0.01, 1e-14);
  EXPECT_EQ(w[0].at(15), 0.0);
}
