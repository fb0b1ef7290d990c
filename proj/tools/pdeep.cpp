// Command-line front end: one subcommand per pipeline mode.
//
//   pdeep synth    --output_dir out
//   pdeep tune     --input out/synthetic.csv --output_dir run1
//   pdeep evaluate --input run1/test_partition.csv --model run1/model.txt \
//                  --normalization run1/normalization.json --output_dir eval
//
// Every configuration key can be set in a key = value file (--config) and
// overridden by the flag of the same name.

#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pdeep/config.hpp"
#include "pdeep/pipeline.hpp"

namespace {

struct SubcommandArgs {
  std::string config_file;
  std::vector<std::string> positional_inputs;
  std::map<std::string, std::string> flags;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Particle-swarm tuned MLP pipeline for network-flow forensics"};
  app.require_subcommand(1);

  const std::vector<std::pair<pdeep::Mode, std::string>> modes = {
      {pdeep::Mode::Ingest, "digest, split and normalize a flow CSV"},
      {pdeep::Mode::Digest, "append SHA-256 digests of files to the manifest"},
      {pdeep::Mode::Synth, "write a seeded synthetic flow CSV"},
      {pdeep::Mode::Tune, "tune batch size, epochs and learning rate, then train and evaluate"},
      {pdeep::Mode::Train, "train with fixed hyperparameters and evaluate"},
      {pdeep::Mode::Evaluate, "score a CSV with a saved model"},
      {pdeep::Mode::Compress, "compare tuned pipelines with and without feature compression"},
  };

  std::map<pdeep::Mode, SubcommandArgs> args;
  std::map<pdeep::Mode, CLI::App*> subs;
  for (const auto& [mode, help] : modes) {
    CLI::App* sub = app.add_subcommand(pdeep::to_string(mode), help);
    SubcommandArgs& a = args[mode];
    sub->add_option("--config", a.config_file, "key = value configuration file");
    for (const auto& key : pdeep::config_keys()) {
      sub->add_option_function<std::string>(
          "--" + key.name, [&a, name = key.name](const std::string& v) { a.flags[name] = v; },
          key.help + " (default: " + (key.default_value.empty() ? "unset" : key.default_value) + ")");
    }
    if (mode == pdeep::Mode::Digest) sub->add_option("files", a.positional_inputs, "files to digest");
    subs[mode] = sub;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return pdeep::kExitConfig;
  }

  for (const auto& [mode, sub] : subs) {
    if (!sub->parsed()) continue;
    SubcommandArgs& a = args[mode];
    std::vector<std::string> errors;
    pdeep::ConfigMap file;
    if (!a.config_file.empty()) file = pdeep::read_config_file(a.config_file, errors);
    if (!a.positional_inputs.empty()) {
      std::string joined;
      for (const auto& p : a.positional_inputs) joined += (joined.empty() ? "" : ",") + p;
      a.flags["input"] = joined;
    }
    auto validated = pdeep::validate_config(pdeep::merge_config(file, a.flags), mode);
    errors.insert(errors.end(), validated.errors.begin(), validated.errors.end());
    if (!errors.empty() || !validated.config) {
      for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
      return pdeep::kExitConfig;
    }
    return pdeep::run(*validated.config, std::cout, std::cerr);
  }
  return pdeep::kExitConfig;
}
