#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pdeep/flow_data.hpp"

namespace pdeep {

inline constexpr double kStdFloor = 1e-9;

// How per-feature weights are reduced from the correlation matrix.
// RowMean: weight_j = mean of row j. GlobalMean: one scalar for all features.
enum class WeightReduction { RowMean, GlobalMean };

std::string to_string(WeightReduction r);

/// Collapses every record into one value: the correlation-weighted sum of
/// per-feature Gaussian densities, min-max scaled with the fitting range.
struct CompressionModel {
  std::vector<std::string> source_features;
  std::vector<double> means;
  std::vector<double> stddevs;  // population, floored at kStdFloor
  std::vector<double> weights;
  double output_min = 0.0;
  double output_max = 0.0;
  WeightReduction reduction = WeightReduction::RowMean;

  std::size_t feature_count() const noexcept { return means.size(); }
};

// Pearson correlation, population moments. Constant features get 0 off the
// diagonal; the diagonal is 1.
std::vector<std::vector<double>> correlation_matrix(const FlowDataset& dataset);

double gaussian_pdf(double x, double mean, double stddev);

CompressionModel fit_compression(const FlowDataset& train_set, WeightReduction reduction = WeightReduction::RowMean);

// Weighted density sums before the final scaling.
std::vector<double> compressed_sums(const CompressionModel& model, const FlowDataset& dataset);

// One-feature dataset in [0, 1]; labels and record order preserved.
FlowDataset compress(const CompressionModel& model, const FlowDataset& dataset);

std::string compression_to_text(const CompressionModel& model);
CompressionModel compression_from_text(std::string_view text);
void save_compression(const CompressionModel& model, const std::filesystem::path& path);
CompressionModel load_compression(const std::filesystem::path& path);

}  // namespace pdeep
