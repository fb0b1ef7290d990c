#include "pdeep/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "pdeep/error.hpp"

namespace pdeep {

ConfusionMatrix confusion(std::span<const double> scores, std::span<const FlowLabel> labels, double threshold) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  if (scores.empty()) throw std::invalid_argument("confusion of an empty input");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted_attack = scores[i] >= threshold;
    if (labels[i] == FlowLabel::Attack) {
      predicted_attack ? ++cm.tp : ++cm.fn;
    } else {
      predicted_attack ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm, double threshold) {
  if (cm.total() == 0) throw std::invalid_argument("metrics of an all-zero confusion matrix");
  MetricsReport r;
  r.threshold = threshold;
  r.counts = cm;
  const auto tp = static_cast<double>(cm.tp);
  const auto tn = static_cast<double>(cm.tn);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  auto ratio = [&r](double num, double den, const char* name) {
    if (den > 0.0) return num / den;
    r.undefined.emplace_back(name);
    return 0.0;
  };
  r.accuracy = (tp + tn) / static_cast<double>(cm.total());
  r.precision = ratio(tp, tp + fp, "precision");
  r.recall = ratio(tp, tp + fn, "recall");
  r.fpr = ratio(fp, fp + tn, "fpr");
  r.fnr = ratio(fn, fn + tp, "fnr");
  r.f_measure = ratio(2.0 * tp, 2.0 * tp + fp + fn, "f_measure");
  return r;
}

double roc_auc(std::span<const double> scores, std::span<const FlowLabel> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::isnan(scores[i])) throw DataError("NaN score");
    if (labels[i] == FlowLabel::Attack) ++n_pos;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("AUC needs both attack and normal labels");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Sum of 1-based average ranks of the positives.
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (labels[order[j]] == FlowLabel::Attack) ++pos_in_group;
      ++j;
    }
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    pos_rank_sum += avg_rank * static_cast<double>(pos_in_group);
    i = j;
  }
  const auto p = static_cast<double>(n_pos);
  const auto q = static_cast<double>(n_neg);
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

MetricsReport evaluate_scores(std::span<const double> scores, std::span<const FlowLabel> labels, double threshold) {
  MetricsReport r = compute_metrics(confusion(scores, labels, threshold), threshold);
  if (r.counts.tp + r.counts.fn > 0 && r.counts.tn + r.counts.fp > 0) r.auc = roc_auc(scores, labels);
  return r;
}

std::string metrics_to_json(const MetricsReport& r, int indent) {
  nlohmann::ordered_json j;
  j["accuracy"] = r.accuracy;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["fpr"] = r.fpr;
  j["fnr"] = r.fnr;
  j["f_measure"] = r.f_measure;
  j["auc"] = r.auc ? nlohmann::ordered_json(*r.auc) : nlohmann::ordered_json(nullptr);
  j["threshold"] = r.threshold;
  j["confusion"] = {{"tp", r.counts.tp}, {"tn", r.counts.tn}, {"fp", r.counts.fp}, {"fn", r.counts.fn}};
  j["undefined"] = r.undefined;
  return j.dump(indent);
}

MetricsReport metrics_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.accuracy = j.at("accuracy").get<double>();
    r.precision = j.at("precision").get<double>();
    r.recall = j.at("recall").get<double>();
    r.fpr = j.at("fpr").get<double>();
    r.fnr = j.at("fnr").get<double>();
    r.f_measure = j.at("f_measure").get<double>();
    if (!j.at("auc").is_null()) r.auc = j.at("auc").get<double>();
    r.threshold = j.at("threshold").get<double>();
    const auto& c = j.at("confusion");
    r.counts = {c.at("tp").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                c.at("fn").get<std::uint64_t>()};
    r.undefined = j.value("undefined", std::vector<std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed metrics report: ") + e.what());
  }
}

}  // namespace pdeep
