#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <vector>

#include "roughwave/frachilbert.hpp"
#include "roughwave/rng.hpp"

namespace roughwave::noise {

using frachilbert::HurstParams;

// Sites x_j = j * delta, j in [-half_width, half_width]. Level k lives on the
// sites with j = k (mod 2). In slab k = (t_k, t_{k+1}) the up triangles are
// centred on j = k+1 (mod 2) and the down triangles on j = k (mod 2), so every
// site index carries exactly one triangle of each slab.
struct Lattice {
  double delta = 0.1;
  int n_levels = 1;     // number of slabs; levels run 0..n_levels
  int half_width = 10;  // sites j in [-half_width, half_width]

  int j_min() const { return -half_width; }
  int j_max() const { return half_width; }
  int width() const { return 2 * half_width + 1; }
  double x(int j) const { return delta * j; }
  double time(int k) const { return delta * k; }
  double x_min() const { return x(j_min()); }
  double x_max() const { return x(j_max()); }
  void validate() const;

  // Smallest lattice whose exact region at time t still covers [-reach, reach].
  static Lattice covering(double delta, double t, double reach);
  // Number of levels for horizon t; throws when t is not a multiple of delta.
  static int levels_for(double delta, double t);
};

enum class TriangleKind { up, down };
enum class KindPair { up_up, down_down, up_down };

inline TriangleKind kind_at(int level, int j) {
  return ((j - level) % 2 == 0) ? TriangleKind::down : TriangleKind::up;
}

// Covariance of two triangle masses in one slab. For like pairs the centres
// are 2*lag*delta apart; for up_down the down centre sits (2*lag+1)*delta to
// the right of the up centre.
double triangle_cov(KindPair kinds, long lag, double delta, const HurstParams& p);

// Up/down covariance for an arbitrary odd offset (in units of delta).
double up_down_cov(long odd_offset, double delta, const HurstParams& p);

struct CovTable {
  HurstParams params = HurstParams::reference(0.35);
  double delta = 0.1;
  long max_lag = 0;
  double tolerance = 0.0;  // relative agreement of closed form and tail series at the cutoff
  bool analytic = true;    // false for injected tables, which cannot be extended
  std::vector<double> uu;  // uu[m], like-kind lag m
  std::vector<double> ud;  // ud[m] = cov(up at 0, down at (2m+1) delta)
  std::vector<double> dd;

  double kappa(long odd_offset) const;  // ud by odd offset, either sign
};

CovTable build_cov_table(const Lattice& lattice, const HurstParams& p, long max_lag);
CovTable build_cov_table(double delta, const HurstParams& p, long max_lag);

struct NoiseSlab {
  int level = 0;
  int j_lo = 0;                // site index of values[0]
  std::vector<double> values;  // triangle mass centred at j_lo + i; kind from kind_at(level, j)
  std::uint64_t seed = 0;

  double at(int j) const { return values[static_cast<std::size_t>(j - j_lo)]; }
  double& at(int j) { return values[static_cast<std::size_t>(j - j_lo)]; }
};

// Circulant embedding of the stationary sequence X_i = (U_i, D_i) of up/down
// masses. The 2x2 spectral factors are computed once; sampling costs two
// complex FFTs per slab.
class SlabSampler {
 public:
  SlabSampler(const CovTable& table, const Lattice& lattice);
  ~SlabSampler();
  SlabSampler(const SlabSampler&) = delete;
  SlabSampler& operator=(const SlabSampler&) = delete;

  // Per-thread scratch buffers (FFTW-aligned).
  class Workspace {
   public:
    explicit Workspace(int n);
    ~Workspace();
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

   private:
    friend class SlabSampler;
    double* w1_;  // interleaved complex, length n
    double* w2_;
    std::normal_distribution<double> normal_;
  };
  std::unique_ptr<Workspace> make_workspace() const;

  NoiseSlab sample(int level, Engine& rng, Workspace& ws) const;
  NoiseSlab zero(int level) const;

  int embedding_size() const { return n_embed_; }
  double min_eigen_ratio() const { return min_eigen_ratio_; }
  const Lattice& lattice() const { return lattice_; }

 private:
  Lattice lattice_;
  int n_embed_ = 0;
  double min_eigen_ratio_ = 0.0;
  std::vector<std::complex<double>> a11_, a12_, a21_, a22_;  // Hermitian square roots per frequency
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

// Convenience: sample with the stream of (master, replica, level).
NoiseSlab sample_slab(const SlabSampler& sampler, int level, std::uint64_t master, std::uint64_t replica,
                      SlabSampler::Workspace& ws);

struct Cell {
  double s0 = 0.0, s1 = 0.0, y0 = 0.0, y1 = 0.0;
};

// hilbert: <1_T, 1_cell>_H (fractional inner product).
// lebesgue: |T intersect cell|, i.e. the shift that adds eps * 1_cell to the noise
// density; its derivative pairs Du with 1_cell in L^2.
enum class Pairing { hilbert, lebesgue };

// Weights laid out like NoiseSlab (one vector per slab over the full site range).
std::vector<NoiseSlab> cm_shift_weights(const Cell& cell, const Lattice& lattice, const HurstParams& p,
                                        Pairing pairing = Pairing::hilbert);

// Pairing of a single triangle with a cell (exposed for tests).
double triangle_cell_pairing(TriangleKind kind, double t_k, double center, double delta, const Cell& cell,
                             const HurstParams& p, Pairing pairing);

void write_cov_table(const std::filesystem::path& path, const CovTable& table);
CovTable read_cov_table(const std::filesystem::path& path);

}  // namespace roughwave::noise
