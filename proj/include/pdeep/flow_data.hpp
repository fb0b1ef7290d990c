#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pdeep {

enum class FlowLabel : std::uint8_t { Normal = 0, Attack = 1 };

struct FlowRecord {
  std::vector<double> features;
  FlowLabel label = FlowLabel::Normal;
};

struct FeatureRange {
  double min = 0.0;
  double max = 0.0;
};

// Per-feature (min, max) observed on the data the scaling was fitted on.
using NormalizationStats = std::vector<FeatureRange>;

/// Labeled flow vectors stored row-major in one contiguous buffer.
///
/// Immutable once built; every transform returns a new dataset. When
/// `normalization()` is present all feature values lie in [0, 1].
class FlowDataset {
 public:
  FlowDataset() = default;
  FlowDataset(std::vector<std::string> feature_names, std::span<const FlowRecord> records);
  FlowDataset(std::vector<std::string> feature_names, std::vector<double> values,
              std::vector<FlowLabel> labels, std::optional<NormalizationStats> normalization = {});

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t feature_count() const noexcept { return feature_names_.size(); }

  std::span<const double> features(std::size_t row) const {
    return {values_.data() + row * feature_count(), feature_count()};
  }
  FlowLabel label(std::size_t row) const { return labels_[row]; }
  FlowRecord record(std::size_t row) const;

  std::span<const double> values() const noexcept { return values_; }
  std::span<const FlowLabel> labels() const noexcept { return labels_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::optional<NormalizationStats>& normalization() const noexcept { return normalization_; }

  std::size_t count(FlowLabel label) const;

  // Rows in the given order (duplicates allowed); keeps names and normalization.
  FlowDataset subset(std::span<const std::size_t> rows) const;

 private:
  std::vector<std::string> feature_names_;
  std::vector<double> values_;
  std::vector<FlowLabel> labels_;
  std::optional<NormalizationStats> normalization_;
};

// ---------------------------------------------------------------------------
// CSV ingestion

struct CsvOptions {
  std::string label_column = "label";
  // Label value mapped to Attack. Unset: the lexicographically smaller of the
  // two distinct values maps to Normal.
  std::optional<std::string> positive_label;
  std::vector<std::string> ignore_columns;
};

struct LabelMapping {
  std::string normal_value;
  std::string attack_value;
  bool explicit_mapping = false;
};

struct LoadedFlows {
  FlowDataset dataset;
  LabelMapping labels;
};

LoadedFlows load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
LoadedFlows parse_csv(std::string_view text, const CsvOptions& options = {},
                      std::string_view source_name = "<memory>");

// Labels are written as 0 (normal) / 1 (attack); values use the shortest
// round-trip decimal form, so reading the file back is exact.
void write_csv(const FlowDataset& dataset, const std::filesystem::path& path,
               std::string_view label_column = "label");
std::string to_csv(const FlowDataset& dataset, std::string_view label_column = "label");

// ---------------------------------------------------------------------------
// Preservation

struct ManifestEntry {
  std::string source;
  std::string sha256;  // 64 lowercase hex chars
  std::uint64_t bytes = 0;
  std::string timestamp;  // UTC, ISO 8601, e.g. 2026-10-14T09:30:00Z
};

ManifestEntry digest_file(const std::filesystem::path& path);
bool verify_entry(const ManifestEntry& entry);

std::string to_json_line(const ManifestEntry& entry);
ManifestEntry parse_manifest_line(std::string_view line);
void append_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

std::string utc_timestamp_now();

// ---------------------------------------------------------------------------
// Scaling and partitioning

// Fits per-feature min/max on `dataset` and maps into [0, 1]. Constant
// features map to 0.
FlowDataset min_max_normalize(const FlowDataset& dataset);

// Reuses fitted statistics; results are clipped to [0, 1].
FlowDataset apply_normalization(const FlowDataset& dataset, const NormalizationStats& stats);

struct SplitSpec {
  double train_fraction = 0.8;
  std::uint64_t seed = 0;
  bool stratified = true;
};

// Returns (train, test). Both partitions keep the input's relative order.
std::pair<FlowDataset, FlowDataset> split(const FlowDataset& dataset, const SplitSpec& spec);

struct SynthSpec {
  std::size_t n = 1000;
  double attack_fraction = 0.5;
  std::size_t feature_count = 13;
  // Euclidean distance between the class means; unit-variance classes.
  double separation = 4.0;
  std::uint64_t seed = 0;
};

FlowDataset generate_synthetic(const SynthSpec& spec);

}  // namespace pdeep
