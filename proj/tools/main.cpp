#include <cstdio>
#include <string>

#include "CLI11.hpp"
#include "lggp/io.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::string dataset;
  std::string output_dir;
  std::string fit_dir;
  long seed = -1;
  bool seed_set = false;
};

void add_common_options(CLI::App* cmd, CliOverrides& overrides) {
  cmd->add_option("-c,--config", overrides.config_path,
                  "key = value configuration file");
  cmd->add_option("-d,--dataset", overrides.dataset, "dataset CSV path");
  cmd->add_option("-o,--output-dir", overrides.output_dir, "output directory");
  cmd->add_option("--seed", overrides.seed, "master RNG seed")
      ->each([&overrides](const std::string&) { overrides.seed_set = true; });
}

int dispatch(lggp::RunMode mode, const CliOverrides& overrides) {
  try {
    lggp::RunConfig config;
    if (!overrides.config_path.empty()) {
      config = lggp::parse_config_file(overrides.config_path);
    }
    config.mode = mode;
    if (!overrides.dataset.empty()) {
      config.dataset_path = overrides.dataset;
    }
    if (!overrides.output_dir.empty()) {
      config.output_dir = overrides.output_dir;
    }
    if (!overrides.fit_dir.empty()) {
      config.fit_dir = overrides.fit_dir;
    }
    if (overrides.seed_set) {
      config.seed = static_cast<std::uint64_t>(overrides.seed);
    }
    return lggp::run(config);
  } catch (const std::invalid_argument& err) {
    std::fprintf(stderr, "config error: %s\n", err.what());
    return 2;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Log-Gaussian gamma process estimation"};
  app.require_subcommand(1);

  CliOverrides overrides;
  lggp::RunMode selected = lggp::RunMode::kFitPl;

  const struct {
    const char* name;
    const char* help;
    lggp::RunMode mode;
  } subcommands[] = {
      {"simulate", "Generate a synthetic dataset", lggp::RunMode::kSimulate},
      {"fit-hmc", "Direct NUTS, long chain", lggp::RunMode::kFitHmc},
      {"fit-hmc-short", "Direct NUTS, short chain", lggp::RunMode::kFitHmcShort},
      {"fit-pl", "Posterior linearization + NUTS on hyperparameters",
       lggp::RunMode::kFitPl},
      {"fit-pl-tempered", "Posterior linearization + tempered NUTS",
       lggp::RunMode::kFitPlTempered},
      {"predict", "Predict at new locations from a finished fit",
       lggp::RunMode::kPredict},
  };
  for (const auto& sub : subcommands) {
    CLI::App* cmd = app.add_subcommand(sub.name, sub.help);
    add_common_options(cmd, overrides);
    if (sub.mode == lggp::RunMode::kPredict) {
      cmd->add_option("--fit-dir", overrides.fit_dir,
                      "directory of a previous fit");
    }
    cmd->callback([&selected, mode = sub.mode] { selected = mode; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 2;
  }
  return dispatch(selected, overrides);
}
