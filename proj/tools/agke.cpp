// Scenario runner for the adaptive group key exchange.
//
//   agke run --config scenario.json [--out DIR] [--seed N] [--group-preset NAME] [--quiet]
//   agke verify --transcript out/transcript.jsonl --summary out/summary.json

#include <iostream>

#include <CLI11.hpp>

#include "agke/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adaptive group key exchange scenario runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Execute a scenario and write its artifacts");
  run->add_option("--config", config_path, "Scenario JSON")->required();
  run->add_option("--out", out_dir, "Artifact directory")->capture_default_str();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--group-preset", preset, "Override the group")
      ->check(CLI::IsMember({"toy23", "test64", "rfc3526-2048"}));
  run->add_flag("--quiet", quiet, "Only report failures");

  std::string transcript_path;
  std::string summary_path;
  auto* verify = app.add_subcommand("verify", "Re-check artifacts of a finished run offline");
  verify->add_option("--transcript", transcript_path, "transcript.jsonl")->required();
  verify->add_option("--summary", summary_path, "summary.json")->required();

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    agke::RunOptions options;
    options.out_dir = out_dir;
    options.seed = seed;
    options.group_preset = preset;
    auto result = agke::run_scenario_file(config_path, options);
    if (result.exit_code != agke::kExitOk) {
      std::cerr << "agke run: " << result.message << '\n';
      return result.exit_code;
    }
    if (!quiet) {
      for (const auto& ev : result.summary.at("events")) {
        std::cout << ev.at("session").get<std::string>() << ' ' << ev.at("type").get<std::string>()
                  << " m=" << ev.at("m") << " rounds=" << ev.at("rounds")
                  << " verdict=" << ev.at("verdict").get<std::string>() << '\n';
      }
      std::cout << '\n' << result.report_text;
      std::cout << "artifacts written to " << out_dir << '\n';
    }
    return agke::kExitOk;
  }

  auto result = agke::verify_files(transcript_path, summary_path);
  if (result.exit_code != agke::kExitOk) {
    std::cerr << "agke verify: " << result.message << '\n';
    return result.exit_code;
  }
  std::cout << "verify: all checks passed\n";
  return agke::kExitOk;
}
