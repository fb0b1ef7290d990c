#include "pdeep/flow_data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "pdeep/error.hpp"
#include "pdeep/random.hpp"
#include "pdeep/sha256.hpp"

namespace pdeep {

// ---------------------------------------------------------------------------
// FlowDataset

FlowDataset::FlowDataset(std::vector<std::string> feature_names, std::span<const FlowRecord> records)
    : feature_names_(std::move(feature_names)) {
  const std::size_t width = feature_names_.size();
  values_.reserve(records.size() * width);
  labels_.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].features.size() != width) {
      throw DataError("record " + std::to_string(i) + " has " +
                      std::to_string(records[i].features.size()) + " features, expected " +
                      std::to_string(width));
    }
    values_.insert(values_.end(), records[i].features.begin(), records[i].features.end());
    labels_.push_back(records[i].label);
  }
}

FlowDataset::FlowDataset(std::vector<std::string> feature_names, std::vector<double> values,
                         std::vector<FlowLabel> labels, std::optional<NormalizationStats> normalization)
    : feature_names_(std::move(feature_names)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      normalization_(std::move(normalization)) {
  if (values_.size() != labels_.size() * feature_names_.size()) {
    throw DataError("value buffer size does not match records x features");
  }
  for (FlowLabel l : labels_) {
    if (l != FlowLabel::Normal && l != FlowLabel::Attack) throw DataError("label must be 0 or 1");
  }
  if (normalization_) {
    if (normalization_->size() != feature_names_.size()) {
      throw DataError("normalization stats do not match feature count");
    }
    for (double v : values_) {
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("normalized dataset has a value outside [0, 1]");
    }
  }
}

FlowRecord FlowDataset::record(std::size_t row) const {
  auto f = features(row);
  return FlowRecord{std::vector<double>(f.begin(), f.end()), labels_[row]};
}

std::size_t FlowDataset::count(FlowLabel label) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), label));
}

FlowDataset FlowDataset::subset(std::span<const std::size_t> rows) const {
  const std::size_t width = feature_count();
  std::vector<double> values;
  values.reserve(rows.size() * width);
  std::vector<FlowLabel> labels;
  labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw std::out_of_range("subset row out of range");
    auto f = features(r);
    values.insert(values.end(), f.begin(), f.end());
    labels.push_back(labels_[r]);
  }
  return FlowDataset(feature_names_, std::move(values), std::move(labels), normalization_);
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

// Comma-separated fields; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.emplace_back(was_quoted ? cur : std::string(trim(cur)));
      cur.clear();
      was_quoted = false;
    } else {
      cur.push_back(c);
    }
  }
  out.emplace_back(was_quoted ? cur : std::string(trim(cur)));
  return out;
}

bool parse_double(std::string_view s, double& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string shortest(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

LoadedFlows parse_csv(std::string_view text, const CsvOptions& options, std::string_view source_name) {
  const std::string src(source_name);
  std::vector<std::string_view> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) throw DataError(src + ": missing header row");

  std::string_view header_line = lines.front();
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);
  const std::vector<std::string> header = split_fields(header_line);

  std::size_t label_index = header.size();
  std::vector<std::size_t> feature_columns;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == options.label_column) {
      label_index = c;
    } else if (std::find(options.ignore_columns.begin(), options.ignore_columns.end(), header[c]) ==
               options.ignore_columns.end()) {
      feature_columns.push_back(c);
      feature_names.push_back(header[c]);
    }
  }
  if (label_index == header.size()) {
    throw DataError(src + ": label column '" + options.label_column + "' not found in header");
  }

  std::vector<double> values;
  std::vector<std::string> raw_labels;
  values.reserve((lines.size() - 1) * feature_columns.size());
  raw_labels.reserve(lines.size() - 1);
  std::size_t row = 0;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    ++row;
    const std::vector<std::string> fields = split_fields(lines[li]);
    if (fields.size() != header.size()) {
      throw DataError(src + ": row " + std::to_string(row) + " (line " + std::to_string(li + 1) +
                      ") has " + std::to_string(fields.size()) + " columns, header has " +
                      std::to_string(header.size()));
    }
    for (std::size_t k = 0; k < feature_columns.size(); ++k) {
      double v;
      if (!parse_double(fields[feature_columns[k]], v)) {
        throw DataError(src + ": row " + std::to_string(row) + " (line " + std::to_string(li + 1) +
                        "), column '" + feature_names[k] + "': cannot parse '" +
                        fields[feature_columns[k]] + "' as a finite number");
      }
      values.push_back(v);
    }
    raw_labels.push_back(fields[label_index]);
  }

  std::set<std::string> distinct(raw_labels.begin(), raw_labels.end());
  LabelMapping mapping;
  if (options.positive_label) {
    mapping.explicit_mapping = true;
    mapping.attack_value = *options.positive_label;
    distinct.erase(*options.positive_label);
    if (distinct.size() > 1) {
      throw DataError(src + ": label column has more than two distinct values");
    }
    mapping.normal_value = distinct.empty() ? std::string() : *distinct.begin();
  } else {
    if (distinct.size() != 2) {
      throw DataError(src + ": label column must contain exactly two distinct values, found " +
                      std::to_string(distinct.size()));
    }
    mapping.normal_value = *distinct.begin();
    mapping.attack_value = *std::next(distinct.begin());
  }

  std::vector<FlowLabel> labels;
  labels.reserve(raw_labels.size());
  for (const auto& l : raw_labels) {
    labels.push_back(l == mapping.attack_value ? FlowLabel::Attack : FlowLabel::Normal);
  }
  return {FlowDataset(std::move(feature_names), std::move(values), std::move(labels)), mapping};
}

LoadedFlows load_csv(const std::filesystem::path& path, const CsvOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), options, path.string());
}

std::string to_csv(const FlowDataset& dataset, std::string_view label_column) {
  std::string out;
  for (const auto& name : dataset.feature_names()) {
    out += name;
    out += ',';
  }
  out += label_column;
  out += '\n';
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (double v : dataset.features(r)) {
      out += shortest(v);
      out += ',';
    }
    out += dataset.label(r) == FlowLabel::Attack ? '1' : '0';
    out += '\n';
  }
  return out;
}

void write_csv(const FlowDataset& dataset, const std::filesystem::path& path,
               std::string_view label_column) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_csv(dataset, label_column);
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Preservation manifest

std::string utc_timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ManifestEntry digest_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  Sha256 hash;
  std::vector<std::uint8_t> chunk(1 << 16);
  std::uint64_t total = 0;
  while (in) {
    in.read(reinterpret_cast<char*>(chunk.data()), static_cast<std::streamsize>(chunk.size()));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got == 0) break;
    hash.update(std::span(chunk.data(), got));
    total += got;
  }
  if (in.bad()) throw DataError("read error on " + path.string());
  return ManifestEntry{path.string(), Sha256::to_hex(hash.finish()), total, utc_timestamp_now()};
}

bool verify_entry(const ManifestEntry& entry) {
  const ManifestEntry fresh = digest_file(entry.source);
  return fresh.sha256 == entry.sha256 && fresh.bytes == entry.bytes;
}

std::string to_json_line(const ManifestEntry& entry) {
  nlohmann::ordered_json j;
  j["source"] = entry.source;
  j["sha256"] = entry.sha256;
  j["bytes"] = entry.bytes;
  j["timestamp"] = entry.timestamp;
  return j.dump();
}

ManifestEntry parse_manifest_line(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    ManifestEntry e{j.at("source").get<std::string>(), j.at("sha256").get<std::string>(),
                    j.at("bytes").get<std::uint64_t>(), j.at("timestamp").get<std::string>()};
    const bool hex_ok = e.sha256.size() == 64 &&
                        std::all_of(e.sha256.begin(), e.sha256.end(), [](char c) {
                          return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
                        });
    if (!hex_ok) throw DataError("manifest digest is not 64 lowercase hex characters");
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed manifest line: ") + ex.what());
  }
}

void append_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : entries) out << to_json_line(e) << '\n';
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) out.push_back(parse_manifest_line(line));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

FlowDataset min_max_normalize(const FlowDataset& dataset) {
  if (dataset.empty()) throw DataError("cannot normalize an empty dataset");
  if (dataset.normalization()) throw DataError("dataset is already normalized");
  const std::size_t width = dataset.feature_count();
  NormalizationStats stats(width);
  for (std::size_t j = 0; j < width; ++j) {
    stats[j].min = stats[j].max = dataset.features(0)[j];
  }
  for (std::size_t r = 1; r < dataset.size(); ++r) {
    auto f = dataset.features(r);
    for (std::size_t j = 0; j < width; ++j) {
      stats[j].min = std::min(stats[j].min, f[j]);
      stats[j].max = std::max(stats[j].max, f[j]);
    }
  }
  return apply_normalization(dataset, stats);
}

FlowDataset apply_normalization(const FlowDataset& dataset, const NormalizationStats& stats) {
  const std::size_t width = dataset.feature_count();
  if (stats.size() != width) {
    throw DataError("normalization stats cover " + std::to_string(stats.size()) +
                    " features, dataset has " + std::to_string(width));
  }
  std::vector<double> values(dataset.values().begin(), dataset.values().end());
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    for (std::size_t j = 0; j < width; ++j) {
      double& v = values[r * width + j];
      const double span = stats[j].max - stats[j].min;
      v = span > 0.0 ? std::clamp((v - stats[j].min) / span, 0.0, 1.0) : 0.0;
    }
  }
  return FlowDataset(dataset.feature_names(), std::move(values),
                     std::vector<FlowLabel>(dataset.labels().begin(), dataset.labels().end()), stats);
}

// ---------------------------------------------------------------------------
// Split

std::pair<FlowDataset, FlowDataset> split(const FlowDataset& dataset, const SplitSpec& spec) {
  if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be strictly between 0 and 1");
  }
  const std::size_t n = dataset.size();
  if (n == 0) throw DataError("cannot split an empty dataset");
  const auto n_train = static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw DataError("train_fraction " + shortest(spec.train_fraction) + " on " + std::to_string(n) +
                    " records leaves an empty partition");
  }

  Rng rng(spec.seed);
  std::vector<std::size_t> train_rows;
  train_rows.reserve(n_train);
  if (spec.stratified) {
    std::vector<std::size_t> attack, normal;
    for (std::size_t r = 0; r < n; ++r) {
      (dataset.label(r) == FlowLabel::Attack ? attack : normal).push_back(r);
    }
    rng.shuffle(std::span(normal));
    rng.shuffle(std::span(attack));
    auto attack_train = static_cast<std::size_t>(
        std::llround(spec.train_fraction * static_cast<double>(attack.size())));
    // Keep the overall size exact; absorb rounding in the normal class.
    attack_train = std::clamp(attack_train, n_train > normal.size() ? n_train - normal.size() : 0,
                              std::min(attack.size(), n_train));
    const std::size_t normal_train = n_train - attack_train;
    train_rows.insert(train_rows.end(), attack.begin(), attack.begin() + static_cast<std::ptrdiff_t>(attack_train));
    train_rows.insert(train_rows.end(), normal.begin(), normal.begin() + static_cast<std::ptrdiff_t>(normal_train));
  } else {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    rng.shuffle(std::span(all));
    train_rows.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_train));
  }
  std::sort(train_rows.begin(), train_rows.end());

  std::vector<std::size_t> test_rows;
  test_rows.reserve(n - n_train);
  for (std::size_t r = 0, k = 0; r < n; ++r) {
    if (k < train_rows.size() && train_rows[k] == r) {
      ++k;
    } else {
      test_rows.push_back(r);
    }
  }
  return {dataset.subset(train_rows), dataset.subset(test_rows)};
}

// ---------------------------------------------------------------------------
// Synthetic flows

FlowDataset generate_synthetic(const SynthSpec& spec) {
  if (spec.n < 2) throw std::invalid_argument("synthetic dataset needs n >= 2");
  if (spec.feature_count == 0) throw std::invalid_argument("feature_count must be positive");
  if (!(spec.attack_fraction > 0.0 && spec.attack_fraction < 1.0)) {
    throw std::invalid_argument("attack_fraction must be strictly between 0 and 1");
  }
  if (!(spec.separation >= 0.0) || !std::isfinite(spec.separation)) {
    throw std::invalid_argument("separation must be a nonnegative finite number");
  }
  const auto n_attack = static_cast<std::size_t>(std::llround(spec.attack_fraction * static_cast<double>(spec.n)));
  if (n_attack == 0 || n_attack == spec.n) {
    throw std::invalid_argument("attack_fraction leaves one class empty for n=" + std::to_string(spec.n));
  }

  Rng rng(spec.seed);
  std::vector<FlowLabel> labels(spec.n, FlowLabel::Normal);
  std::fill_n(labels.begin(), n_attack, FlowLabel::Attack);
  rng.shuffle(std::span(labels));

  // Attack mean offset on every axis so the mean distance equals `separation`.
  const double shift = spec.separation / std::sqrt(static_cast<double>(spec.feature_count));
  std::vector<double> values;
  values.reserve(spec.n * spec.feature_count);
  for (std::size_t r = 0; r < spec.n; ++r) {
    const double mu = labels[r] == FlowLabel::Attack ? shift : 0.0;
    for (std::size_t j = 0; j < spec.feature_count; ++j) values.push_back(mu + rng.normal());
  }

  std::vector<std::string> names;
  for (std::size_t j = 0; j < spec.feature_count; ++j) names.push_back("f" + std::to_string(j + 1));
  return FlowDataset(std::move(names), std::move(values), std::move(labels));
}

}  // namespace pdeep
