#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdeep/compress.hpp"
#include "pdeep/flow_data.hpp"
#include "pdeep/mlp.hpp"
#include "pdeep/pso.hpp"
#include "pdeep/tuner.hpp"

namespace pdeep {

enum class Mode { Ingest, Digest, Synth, Tune, Train, Evaluate, Compress };

std::string to_string(Mode m);
std::optional<Mode> parse_mode(std::string_view s);

// Flat key -> value settings, as read from a config file or flags.
using ConfigMap = std::map<std::string, std::string>;

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

// Every recognised key with its default.
const std::vector<ConfigKey>& config_keys();

// "key = value" lines; '#' starts a comment. Malformed lines are appended
// to `errors` and skipped.
ConfigMap parse_config_text(std::string_view text, std::vector<std::string>& errors);
ConfigMap read_config_file(const std::filesystem::path& path, std::vector<std::string>& errors);

// Defaults, then `file`, then `overrides`.
ConfigMap merge_config(const ConfigMap& file, const ConfigMap& overrides);

struct RunConfig {
  Mode mode = Mode::Tune;
  std::vector<std::filesystem::path> inputs;
  std::filesystem::path output_dir;
  CsvOptions csv;
  std::uint64_t master_seed = 42;

  double train_fraction = 0.8;
  bool stratified = true;
  double validation_fraction = 0.25;

  std::vector<std::size_t> hidden_layers;
  // Unset: n_attack / n_normal on the training partition.
  std::optional<double> class_weight_normal;
  double class_weight_attack = 1.0;

  SearchSpace space;
  PsoConfig pso;
  bool cache = true;
  std::size_t threads = 1;
  double threshold = 0.5;

  Hyperparameters hp;  // train mode
  SynthSpec synth;     // synth mode; seed derived from master_seed

  std::filesystem::path model_path;          // evaluate mode
  std::filesystem::path normalization_path;  // evaluate mode, optional
  std::filesystem::path compression_path;    // evaluate mode, optional
  WeightReduction reduction = WeightReduction::RowMean;

  // The merged key/value view this config was built from.
  ConfigMap echo;
};

struct ValidatedConfig {
  std::optional<RunConfig> config;
  std::vector<std::string> errors;

  bool ok() const noexcept { return errors.empty() && config.has_value(); }
};

// Checks every key and every cross-field invariant; all violations are
// reported, not only the first.
ValidatedConfig validate_config(const ConfigMap& merged, Mode mode);

}  // namespace pdeep
