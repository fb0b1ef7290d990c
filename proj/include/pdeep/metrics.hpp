#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdeep/flow_data.hpp"

namespace pdeep {

// Positive class is Attack.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double f_measure = 0.0;
  std::optional<double> auc;
  double threshold = 0.5;
  ConfusionMatrix counts;
  // Names of ratios whose denominator was zero; those are reported as 0.
  std::vector<std::string> undefined;
};

// score >= threshold counts as a predicted attack.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const FlowLabel> labels,
                          double threshold = 0.5);

MetricsReport compute_metrics(const ConfusionMatrix& cm, double threshold = 0.5);

// Mann-Whitney statistic via average ranks; ties count one half.
double roc_auc(std::span<const double> scores, std::span<const FlowLabel> labels);

// confusion + compute_metrics, plus AUC when both classes are present.
MetricsReport evaluate_scores(std::span<const double> scores, std::span<const FlowLabel> labels,
                              double threshold = 0.5);

std::string metrics_to_json(const MetricsReport& report, int indent = 2);
MetricsReport metrics_from_json(const std::string& text);

}  // namespace pdeep
