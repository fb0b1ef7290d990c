#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pdeep/config.hpp"

namespace pdeep {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

struct RunSummary {
  std::vector<std::filesystem::path> artifacts;
};

// Executes one mode and writes its artifacts under config.output_dir.
// Throws ConfigError / DataError / NumericError / std::invalid_argument.
RunSummary run_pipeline(const RunConfig& config, std::ostream& log);

// run_pipeline with errors mapped to exit codes; the diagnostic goes to `err`.
int run(const RunConfig& config, std::ostream& log, std::ostream& err);

// Normalization stats as JSON: {"features": [{"name", "min", "max"}, ...]}.
std::string normalization_to_json(const std::vector<std::string>& names, const NormalizationStats& stats);
NormalizationStats normalization_from_json(const std::string& text);

// Drops volatile fields ("timestamp", "timing") so reports of two runs with
// the same seed compare equal.
std::string strip_volatile(const std::string& report_json);

}  // namespace pdeep
