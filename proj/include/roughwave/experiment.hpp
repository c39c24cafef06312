#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "roughwave/chaos.hpp"
#include "roughwave/noise.hpp"
#include "roughwave/stats.hpp"

namespace roughwave::experiment {

enum class Kind { simulate, variance_scan, clt, ergodic, chaos_tables, malliavin_check, conjecture, selftest };

const char* to_string(Kind k);
Kind parse_kind(const std::string& s);

struct ExperimentConfig {
  Kind kind = Kind::simulate;
  double H = 0.35;
  double t = 1.0;                  // horizon
  std::vector<double> probe_times;  // defaults to {t}
  std::vector<double> R_list{25, 50, 100, 200};
  double delta = 0.05;
  std::size_t M = 2000;
  std::uint64_t seed = 20240531;
  std::filesystem::path out_dir = "out";
  chaos::KappaConvention kappa = chaos::KappaConvention::spectral;
  std::optional<std::filesystem::path> cov_cache;
  int threads = 0;  // 0: all available
  bool allow_small_M = false;
  bool dump_trajectory = false;

  // ergodic / stationarity
  std::vector<double> ergodic_b{1.0};
  std::vector<double> ergodic_zeta{0.0};
  std::vector<std::pair<double, double>> site_pairs{{0.0, 1.0}, {-2.0, 3.0}, {-10.0, 10.0}};
  std::vector<std::pair<double, double>> increment_pairs{{0.25, 0.5}, {0.5, 1.0}, {0.25, 1.0}};
  double increment_R = 100.0;

  // chaos tables
  std::vector<double> t_list{0.25, 0.5, 1.0};
  std::vector<double> x_list{0.0, 0.5, 1.0, 2.0};
  int n_max = 2;

  // conjecture
  double x_max = 4.0;

  // malliavin
  std::vector<noise::Cell> cells{{0.25, 0.5, -0.25, 0.25}};
  double eps = 1e-3;
  double malliavin_x = 0.0;
  noise::Pairing pairing = noise::Pairing::lebesgue;

  std::map<std::string, std::string> echo;  // every key as given, for the manifest

  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
// Applies one "key=value" assignment; throws ConfigError on unknown keys.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string canonical_text(const ExperimentConfig& cfg);

struct ReplicaPlan {
  std::vector<double> R_list;
  std::vector<double> times;
  double site_window = 0.0;  // retain u(t, x) for |x| <= window (0: none)
  bool ergodic = false;
  stats::ErgodicTestFunction tf;
  double horizon() const;
  double reach() const;
};

struct EnsembleOptions {
  int threads = 0;
  std::optional<std::filesystem::path> cov_cache;
};

// Runs M replicas on the smallest exact lattice for the plan. Results are
// stored by replica index, so they do not depend on the thread count.
std::vector<stats::ReplicaResult> run_ensemble(const frachilbert::HurstParams& p, double delta, std::size_t M,
                                               std::uint64_t master, const ReplicaPlan& plan,
                                               const EnsembleOptions& opt = {});

noise::CovTable load_or_build_table(const noise::Lattice& lattice, const frachilbert::HurstParams& p,
                                    const std::optional<std::filesystem::path>& cache);

struct RunOutcome {
  int exit_code = 0;
  std::vector<std::filesystem::path> files;
  std::string message;
};

// Executes the experiment and writes its outputs plus manifest.json.
RunOutcome run(const ExperimentConfig& cfg);

constexpr const char* kToolVersion = "roughwave 1.0.0";

}  // namespace roughwave::experiment
