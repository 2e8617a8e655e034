// vcdf command-line entry point.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "vcdf/commands.hpp"
#include "vcdf/config.hpp"
#include "vcdf/error.hpp"
#include "vcdf/version.hpp"

namespace {

int fail(std::string_view code, const std::string& message, int status) {
  const nlohmann::json j = {{"error", {{"code", code}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Varying coefficient models for diffusion tensors along fiber tracts"};
  app.set_version_flag("--version", "vcdf " + std::string(vcdf::kVersion));

  std::string command;
  std::string config_path;
  std::optional<std::string> input, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> G, threads, replicates;
  std::vector<double> alpha;
  std::optional<double> h1, h2, h3;
  std::vector<std::string> tests;
  bool paper_scale = false;

  app.add_option("command", command, "fit | test | band | simulate | power | coverage | bias | missing")
      ->required()
      ->check(CLI::IsMember(vcdf::command_names()));
  app.add_option("--input", input, "Tract header (.json)");
  app.add_option("--config", config_path, "Run configuration (.json)");
  app.add_option("--seed", seed, "Random seed");
  app.add_option("--G", G, "Bootstrap replicates / resampled paths");
  app.add_option("--alpha", alpha, "Significance levels")->delimiter(',');
  app.add_option("--h1", h1, "Fixed coefficient bandwidth");
  app.add_option("--h2", h2, "Fixed deviation-curve bandwidth");
  app.add_option("--h3", h3, "Fixed error-covariance bandwidth");
  app.add_option("--test", tests, "Hypothesis shorthand covariate=<name> (repeatable)");
  app.add_option("--threads", threads, "Worker threads (0 = all)");
  app.add_option("--out", out, "Output directory");
  app.add_option("--replicates", replicates, "Monte Carlo replicates for simulation studies");
  app.add_flag("--paper-scale", paper_scale, "n = 96, n_G = 112, G = 1000, 3000 replicates");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("ConfigError", e.what(), 2);
  }

  try {
    vcdf::RunConfig cfg = config_path.empty() ? vcdf::RunConfig{} : vcdf::load_config(config_path);
    if (paper_scale) vcdf::use_paper_scale(cfg);
    if (input) cfg.input = *input;
    if (out) cfg.out = *out;
    if (seed) cfg.seed = *seed;
    if (G) cfg.G = *G;
    if (threads) cfg.threads = *threads;
    if (replicates) cfg.simulation.replicates = *replicates;
    if (!alpha.empty()) cfg.alpha = alpha;
    if (h1) cfg.h1 = h1;
    if (h2) cfg.h2 = h2;
    if (h3) cfg.h3 = h3;
    if (!tests.empty()) {
      cfg.test_covariates.clear();
      cfg.hypothesis_file.clear();
      for (const auto& t : tests) {
        const std::string prefix = "covariate=";
        if (t.rfind(prefix, 0) != 0 || t.size() == prefix.size()) {
          throw vcdf::Error(vcdf::ErrorCode::ConfigError, "--test expects covariate=<name>, got '" + t + "'");
        }
        cfg.test_covariates.push_back(t.substr(prefix.size()));
      }
    }
    for (const auto& path : vcdf::run_command(command, cfg)) std::cout << path << "\n";
    return 0;
  } catch (const vcdf::Error& e) {
    return fail(e.name(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("InternalError", e.what(), 1);
  }
}
