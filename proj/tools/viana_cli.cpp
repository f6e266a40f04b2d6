#include <CLI11.hpp>
#include <iostream>

#include "viana/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"viana: experiments on the Viana map family"};
  std::string command = "all";
  std::string config_path, preset, out_dir, replay;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool validate_only = false;

  std::string choices;
  for (const auto& s : viana::subcommands()) choices += (choices.empty() ? "" : " | ") + s;
  app.add_option("command", command, choices)->check(CLI::IsMember(viana::subcommands()));
  app.add_option("--config", config_path, "TOML config file")->check(CLI::ExistingFile);
  app.add_option("--preset", preset, "small | paper")->check(CLI::IsMember({"small", "paper"}));
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (0 = all cores)");
  app.add_option("--replay", replay, "rerun the configuration stored in a manifest")->check(CLI::ExistingFile);
  app.add_flag("--validate", validate_only, "validate the configuration and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : viana::kExitConfig;
  }

  try {
    viana::ExperimentConfig cfg;
    if (!replay.empty()) {
      std::string stored;
      cfg = viana::config_from_manifest(replay, &stored);
      if (app.count("command") == 0) command = stored;
    } else {
      cfg = viana::load_config(config_path, preset);
    }
    if (seed) cfg.run.seed = *seed;
    if (!out_dir.empty()) cfg.run.out_dir = out_dir;
    if (threads) cfg.run.threads = *threads;
    if (!preset.empty()) cfg.run.preset = preset;

    const auto violations = viana::validate_config(cfg);
    for (const auto& v : violations) std::cerr << "config error: " << v.key << ": " << v.message << " (" << v.reason << ")\n";
    if (!violations.empty()) return viana::kExitConfig;
    if (validate_only) {
      std::cout << "configuration valid\n";
      return viana::kExitOk;
    }

    viana::Runner runner(cfg);
    const int rc = runner.run(command);
    for (const auto& c : runner.checks()) {
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " [" << c.detail << "]\n";
    }
    if (!runner.last_error().empty()) std::cerr << "error: " << runner.last_error() << "\n";
    std::cout << "manifest: " << (std::filesystem::path(cfg.run.out_dir) / "manifest.json").string() << "\n";
    return rc;
  } catch (const viana::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return viana::kExitConfig;
  } catch (const viana::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return viana::kExitNumeric;
  }
}
