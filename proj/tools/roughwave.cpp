#include <CLI11.hpp>
#include <iostream>

#include "roughwave/errors.hpp"
#include "roughwave/experiment.hpp"
#include "roughwave/io.hpp"

namespace rx = roughwave::experiment;

int main(int argc, char** argv) {
  CLI::App app{"Hyperbolic Anderson model with rough spatial noise: simulation and chaos oracles"};
  app.set_version_flag("--version", rx::kToolVersion);

  std::string kind;
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::uint64_t seed = 0;

  app.add_option("kind", kind,
                 "simulate | variance-scan | clt | ergodic | chaos-tables | malliavin-check | conjecture | selftest")
      ->required();
  app.add_option("--config", config_path, "key = value configuration file");
  app.add_option("--set", sets, "override one key (key=value); repeatable");
  auto* out_opt = app.add_option("--out", out_dir, "output directory");
  auto* seed_opt = app.add_option("--seed", seed, "master seed (u64)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    rx::ExperimentConfig cfg;
    if (!config_path.empty()) cfg = rx::parse_config(roughwave::io::read_file(config_path));
    rx::apply_setting(cfg, "kind", kind);
    for (const auto& s : sets) {
      auto eq = s.find('=');
      if (eq == std::string::npos) throw roughwave::ConfigError("--set expects key=value, got '" + s + "'");
      rx::apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
    }
    if (*out_opt) rx::apply_setting(cfg, "out", out_dir);
    if (*seed_opt) rx::apply_setting(cfg, "seed", std::to_string(seed));

    auto res = rx::run(cfg);
    std::cout << rx::to_string(cfg.kind) << ": " << res.message << "\n";
    for (const auto& f : res.files) std::cout << "  " << f.string() << "\n";
    return res.exit_code;
  } catch (const roughwave::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const roughwave::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const roughwave::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << " (achieved " << e.achieved() << ")\n";
    return 3;
  } catch (const roughwave::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
