#include "pdeep/compress.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "pdeep/error.hpp"
#include "text_io.hpp"

namespace pdeep {

std::string to_string(WeightReduction r) { return r == WeightReduction::RowMean ? "row_mean" : "global_mean"; }

namespace {

struct Moments {
  std::vector<double> mean;
  std::vector<double> stddev;  // raw population value, may be 0
};

Moments moments(const FlowDataset& d) {
  const std::size_t w = d.feature_count();
  const auto n = static_cast<double>(d.size());
  Moments m{std::vector<double>(w, 0.0), std::vector<double>(w, 0.0)};
  for (std::size_t r = 0; r < d.size(); ++r) {
    auto f = d.features(r);
    for (std::size_t j = 0; j < w; ++j) m.mean[j] += f[j];
  }
  for (double& v : m.mean) v /= n;
  for (std::size_t r = 0; r < d.size(); ++r) {
    auto f = d.features(r);
    for (std::size_t j = 0; j < w; ++j) m.stddev[j] += (f[j] - m.mean[j]) * (f[j] - m.mean[j]);
  }
  for (double& v : m.stddev) v = std::sqrt(v / n);
  return m;
}

// Names are stored as single tokens: '%' and whitespace are percent-encoded.
std::string encode_name(std::string_view name) {
  static const char* digits = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : name) {
    if (c == '%' || std::isspace(c) || c < 0x20) {
      out += '%';
      out += digits[c >> 4];
      out += digits[c & 15];
    } else {
      out += static_cast<char>(c);
    }
  }
  return out.empty() ? "%" : out;
}

std::string decode_name(std::string_view token) {
  if (token == "%") return {};
  std::string out;
  for (std::size_t i = 0; i < token.size(); ++i) {
    if (token[i] != '%') {
      out += token[i];
      continue;
    }
    if (i + 2 >= token.size()) throw DataError("truncated escape in feature name");
    unsigned code = 0;
    const char* first = token.data() + i + 1;
    const auto [ptr, ec] = std::from_chars(first, first + 2, code, 16);
    if (ec != std::errc() || ptr != first + 2) throw DataError("bad escape in feature name '" + std::string(token) + "'");
    out += static_cast<char>(code);
    i += 2;
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> correlation_matrix(const FlowDataset& dataset) {
  if (dataset.size() < 2) throw DataError("correlation needs at least 2 records");
  const std::size_t w = dataset.feature_count();
  const Moments m = moments(dataset);
  const auto n = static_cast<double>(dataset.size());
  std::vector<std::vector<double>> cov(w, std::vector<double>(w, 0.0));
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    auto f = dataset.features(r);
    for (std::size_t a = 0; a < w; ++a) {
      const double da = f[a] - m.mean[a];
      for (std::size_t b = a; b < w; ++b) cov[a][b] += da * (f[b] - m.mean[b]);
    }
  }
  std::vector<std::vector<double>> corr(w, std::vector<double>(w, 0.0));
  for (std::size_t a = 0; a < w; ++a) {
    corr[a][a] = 1.0;
    for (std::size_t b = a + 1; b < w; ++b) {
      double r = 0.0;
      if (m.stddev[a] > 0.0 && m.stddev[b] > 0.0) {
        r = std::clamp(cov[a][b] / n / (m.stddev[a] * m.stddev[b]), -1.0, 1.0);
      }
      corr[a][b] = corr[b][a] = r;
    }
  }
  return corr;
}

double gaussian_pdf(double x, double mean, double stddev) {
  const double u = (x - mean) / stddev;
  return std::exp(-0.5 * u * u) / (std::sqrt(2.0 * std::numbers::pi) * stddev);
}

CompressionModel fit_compression(const FlowDataset& train_set, WeightReduction reduction) {
  if (train_set.size() < 2) throw DataError("compression fit needs at least 2 records");
  const std::size_t w = train_set.feature_count();
  if (w == 0) throw DataError("compression fit needs at least one feature");
  const Moments m = moments(train_set);
  const auto corr = correlation_matrix(train_set);

  CompressionModel model;
  model.source_features = train_set.feature_names();
  model.means = m.mean;
  model.stddevs = m.stddev;
  for (double& s : model.stddevs) s = std::max(s, kStdFloor);
  model.reduction = reduction;
  model.weights.resize(w);
  double global = 0.0;
  for (std::size_t j = 0; j < w; ++j) {
    double row = 0.0;
    for (double c : corr[j]) row += c;
    model.weights[j] = row / static_cast<double>(w);
    global += row;
  }
  if (reduction == WeightReduction::GlobalMean) {
    std::fill(model.weights.begin(), model.weights.end(), global / static_cast<double>(w * w));
  }

  const std::vector<double> sums = compressed_sums(model, train_set);
  const auto [lo, hi] = std::minmax_element(sums.begin(), sums.end());
  model.output_min = *lo;
  model.output_max = *hi;
  return model;
}

std::vector<double> compressed_sums(const CompressionModel& model, const FlowDataset& dataset) {
  if (dataset.feature_count() != model.feature_count()) {
    throw DataError("dataset has " + std::to_string(dataset.feature_count()) +
                    " features, compression model expects " + std::to_string(model.feature_count()));
  }
  std::vector<double> out(dataset.size(), 0.0);
  for (std::size_t r = 0; r < dataset.size(); ++r) {
    auto f = dataset.features(r);
    double s = 0.0;
    for (std::size_t j = 0; j < f.size(); ++j) s += model.weights[j] * gaussian_pdf(f[j], model.means[j], model.stddevs[j]);
    out[r] = s;
  }
  return out;
}

FlowDataset compress(const CompressionModel& model, const FlowDataset& dataset) {
  std::vector<double> values = compressed_sums(model, dataset);
  const double span = model.output_max - model.output_min;
  for (double& v : values) v = span > 0.0 ? std::clamp((v - model.output_min) / span, 0.0, 1.0) : 0.0;
  return FlowDataset({"compressed"}, std::move(values),
                     std::vector<FlowLabel>(dataset.labels().begin(), dataset.labels().end()),
                     NormalizationStats{{model.output_min, model.output_max}});
}

std::string compression_to_text(const CompressionModel& model) {
  using detail::format_double;
  std::ostringstream out;
  out << "pdeep-compression 1\n";
  out << "reduction " << to_string(model.reduction) << '\n';
  out << "features " << model.feature_count() << '\n';
  for (std::size_t j = 0; j < model.feature_count(); ++j) {
    out << encode_name(model.source_features[j]) << ' ' << format_double(model.means[j]) << ' '
        << format_double(model.stddevs[j]) << ' ' << format_double(model.weights[j]) << '\n';
  }
  out << "output_range " << format_double(model.output_min) << ' ' << format_double(model.output_max) << '\n';
  out << "end\n";
  return out.str();
}

CompressionModel compression_from_text(std::string_view text) {
  detail::TokenReader in(text);
  in.expect("pdeep-compression");
  if (in.next_uint() != 1) throw DataError("unsupported compression format version");
  CompressionModel m;
  in.expect("reduction");
  const auto red = in.next();
  if (red == "row_mean") {
    m.reduction = WeightReduction::RowMean;
  } else if (red == "global_mean") {
    m.reduction = WeightReduction::GlobalMean;
  } else {
    throw DataError("unknown weight reduction '" + std::string(red) + "'");
  }
  in.expect("features");
  const auto count = in.next_uint();
  for (std::uint64_t j = 0; j < count; ++j) {
    m.source_features.push_back(decode_name(in.next()));
    m.means.push_back(in.next_double());
    m.stddevs.push_back(in.next_double());
    m.weights.push_back(in.next_double());
  }
  in.expect("output_range");
  m.output_min = in.next_double();
  m.output_max = in.next_double();
  in.expect("end");
  return m;
}

void save_compression(const CompressionModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << compression_to_text(model);
}

CompressionModel load_compression(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return compression_from_text(buf.str());
}

}  // namespace pdeep
