#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "pdeep/flow_data.hpp"

namespace testutil {

template <typename T>
std::vector<std::remove_const_t<T>> to_vector(std::span<T> s) {
  return {s.begin(), s.end()};
}

inline pdeep::FlowDataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels) {
  std::vector<pdeep::FlowRecord> records;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    records.push_back({rows[i], labels[i] ? pdeep::FlowLabel::Attack : pdeep::FlowLabel::Normal});
  }
  std::vector<std::string> names;
  for (std::size_t j = 0; j < (rows.empty() ? 0 : rows[0].size()); ++j) names.push_back("f" + std::to_string(j + 1));
  return pdeep::FlowDataset(std::move(names), records);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pdeep_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::vector<pdeep::FlowLabel> random_labels(std::mt19937_64& gen, std::size_t n) {
  std::bernoulli_distribution coin(0.5);
  std::vector<pdeep::FlowLabel> out(n);
  for (auto& l : out) l = coin(gen) ? pdeep::FlowLabel::Attack : pdeep::FlowLabel::Normal;
  out.front() = pdeep::FlowLabel::Attack;
  out.back() = pdeep::FlowLabel::Normal;
  return out;
}

}  // namespace testutil
