#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "pdeep/error.hpp"
#include "pdeep/flow_data.hpp"

using namespace pdeep;

namespace {

std::multiset<std::pair<std::vector<double>, FlowLabel>> multiset_of(const FlowDataset& d) {
  std::multiset<std::pair<std::vector<double>, FlowLabel>> out;
  for (std::size_t r = 0; r < d.size(); ++r) {
    const auto f = d.features(r);
    out.insert({std::vector<double>(f.begin(), f.end()), d.label(r)});
  }
  return out;
}

std::string error_of(std::string_view csv, const CsvOptions& opts = {}) {
  try {
    (void)parse_csv(csv, opts, "flows.csv");
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("three-row CSV parses") {
  const auto loaded = parse_csv("f1,f2,label\n1,2,attack\n3,4,normal\n5,6.5,attack\n");
  const FlowDataset& d = loaded.dataset;
  CHECK(d.size() == 3);
  CHECK(d.feature_count() == 2);
  CHECK(d.feature_names() == std::vector<std::string>{"f1", "f2"});
  CHECK(d.features(2)[1] == 6.5);
  CHECK(!d.normalization());
  // "attack" < "normal" lexicographically, so "attack" maps to Normal.
  CHECK(loaded.labels.normal_value == "attack");
  CHECK(d.label(0) == FlowLabel::Normal);
  CHECK(d.label(1) == FlowLabel::Attack);
}

TEST_CASE("explicit positive label overrides the lexicographic mapping") {
  CsvOptions opts;
  opts.positive_label = "attack";
  const auto loaded = parse_csv("f1,label\n1,attack\n3,normal\n", opts);
  CHECK(loaded.dataset.label(0) == FlowLabel::Attack);
  CHECK(loaded.dataset.label(1) == FlowLabel::Normal);
  CHECK(loaded.labels.explicit_mapping);
}

TEST_CASE("label column may sit anywhere and ignored columns are dropped") {
  CsvOptions opts;
  opts.label_column = "cls";
  opts.ignore_columns = {"id"};
  const auto d = parse_csv("id,cls,a,b\n7,0,1.5,2\n8,1,3,4\n", opts).dataset;
  CHECK(d.feature_names() == std::vector<std::string>{"a", "b"});
  CHECK(d.features(1)[0] == 3.0);
  CHECK(d.label(1) == FlowLabel::Attack);
}

TEST_CASE("unparseable cell names the row and the column") {
  std::string csv = "f1,f2,label\n";
  for (int r = 1; r <= 6; ++r) csv += std::to_string(r) + ",1," + std::to_string(r % 2) + "\n";
  csv += "7,oops,1\n";
  const std::string msg = error_of(csv);
  CHECK(msg.find("row 7") != std::string::npos);
  CHECK(msg.find("'f2'") != std::string::npos);
  CHECK(msg.find("flows.csv") != std::string::npos);
}

TEST_CASE("structural CSV errors") {
  CHECK(error_of("f1,label\n1,0\n2,1\n", CsvOptions{"klass", {}, {}}).find("not found") != std::string::npos);
  CHECK(error_of("f1,f2,label\n1,2,0\n1,1\n").find("columns") != std::string::npos);
  CHECK(error_of("f1,label\n1,0\n2,1\n3,2\n").find("two distinct") != std::string::npos);
  CHECK(error_of("").find("header") != std::string::npos);
  CHECK(error_of("f1,label\n1,nan_label\n2,x\n3,inf_value\n").size() > 0);
  CHECK(error_of("f1,label\nnan,0\n2,1\n").find("finite") != std::string::npos);
  CHECK_THROWS_AS(load_csv("/nonexistent/flows.csv"), DataError);
}

TEST_CASE("CSV round trip is exact") {
  const FlowDataset d = generate_synthetic({50, 0.3, 4, 2.0, 9});
  const auto back = parse_csv(to_csv(d)).dataset;
  CHECK(back.values().size() == d.values().size());
  CHECK(std::equal(back.values().begin(), back.values().end(), d.values().begin()));
  CHECK(std::equal(back.labels().begin(), back.labels().end(), d.labels().begin()));
}

TEST_CASE("min-max normalization") {
  const auto d = testutil::make_dataset({{2, 5, 10}, {4, 5, 0}, {6, 5, 5}}, {0, 1, 1});
  const FlowDataset n = min_max_normalize(d);
  REQUIRE(n.normalization());
  CHECK(n.features(0)[0] == 0.0);
  CHECK(n.features(1)[0] == 0.5);
  CHECK(n.features(2)[0] == 1.0);
  for (std::size_t r = 0; r < 3; ++r) CHECK(n.features(r)[1] == 0.0);
  CHECK(n.features(0)[2] == 1.0);
  CHECK(n.features(1)[2] == 0.0);
  CHECK(n.features(2)[2] == 0.5);
  CHECK((*n.normalization())[0].min == 2.0);
  CHECK((*n.normalization())[0].max == 6.0);
  CHECK_THROWS_AS(min_max_normalize(n), DataError);
  CHECK_THROWS_AS(min_max_normalize(testutil::make_dataset({}, {})), DataError);
}

TEST_CASE("applying stored statistics clips out-of-range values") {
  const NormalizationStats stats{{2.0, 6.0}};
  const auto d = testutil::make_dataset({{4}, {8}, {2}, {-1}}, {0, 1, 0, 1});
  const FlowDataset n = apply_normalization(d, stats);
  CHECK(n.features(0)[0] == 0.5);
  CHECK(n.features(1)[0] == 1.0);
  CHECK(n.features(2)[0] == 0.0);
  CHECK(n.features(3)[0] == 0.0);
  CHECK_THROWS_AS(apply_normalization(d, NormalizationStats{{0, 1}, {0, 1}}), DataError);
}

TEST_CASE("normalize then denormalize recovers the originals") {
  const FlowDataset d = generate_synthetic({300, 0.5, 5, 3.0, 17});
  const FlowDataset n = min_max_normalize(d);
  const auto& stats = *n.normalization();
  for (std::size_t r = 0; r < d.size(); ++r) {
    for (std::size_t j = 0; j < d.feature_count(); ++j) {
      const double back = stats[j].min + n.features(r)[j] * (stats[j].max - stats[j].min);
      REQUIRE(std::abs(back - d.features(r)[j]) < 1e-9);
    }
  }
}

TEST_CASE("normalized datasets reject values outside [0, 1]") {
  CHECK_THROWS_AS(FlowDataset({"a"}, {1.5}, {FlowLabel::Normal}, NormalizationStats{{0, 1}}), DataError);
}

TEST_CASE("split sizes") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 10; ++i) {
    rows.push_back({double(i)});
    labels.push_back(i % 2);
  }
  const auto [train, test] = split(testutil::make_dataset(rows, labels), {0.8, 1, false});
  CHECK(train.size() == 8);
  CHECK(test.size() == 2);
}

TEST_CASE("stratified split of 1000 records with 10 attacks") {
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 1000; ++i) {
    rows.push_back({double(i)});
    labels.push_back(i % 100 == 0 ? 1 : 0);
  }
  const FlowDataset d = testutil::make_dataset(rows, labels);
  const auto [train, test] = split(d, {0.8, 5, true});
  std::size_t attacks = 0;
  for (std::size_t r = 0; r < train.size(); ++r) attacks += train.label(r) == FlowLabel::Attack;
  CHECK(attacks == 8);
  CHECK(train.size() == 800);
  CHECK(test.size() == 200);
}

TEST_CASE("split partitions are disjoint, complete and deterministic") {
  const FlowDataset d = generate_synthetic({517, 0.9, 3, 1.0, 3});
  for (bool stratified : {true, false}) {
    const auto [a1, b1] = split(d, {0.7, 99, stratified});
    const auto [a2, b2] = split(d, {0.7, 99, stratified});
    CHECK(testutil::to_vector(a1.values()) == testutil::to_vector(a2.values()));
    CHECK(testutil::to_vector(b1.values()) == testutil::to_vector(b2.values()));
    auto all = multiset_of(a1);
    for (const auto& e : multiset_of(b1)) all.insert(e);
    CHECK(all == multiset_of(d));
    CHECK(a1.size() == static_cast<std::size_t>(std::llround(0.7 * 517)));
  }
  const auto [x, y] = split(d, {0.7, 100, true});
  CHECK(testutil::to_vector(x.values()) != testutil::to_vector(split(d, {0.7, 99, true}).first.values()));
}

TEST_CASE("split rejects fractions that empty a partition") {
  const auto d = testutil::make_dataset({{1}, {2}}, {0, 1});
  CHECK_THROWS_AS(split(d, {0.1, 0, false}), DataError);
  CHECK_THROWS_AS(split(d, {1.0, 0, false}), std::invalid_argument);
}

TEST_CASE("synthetic data: counts, determinism, separation") {
  const FlowDataset d = generate_synthetic({1000, 0.995, 13, 4.0, 21});
  CHECK(d.count(FlowLabel::Attack) == 995);
  CHECK(d.count(FlowLabel::Normal) == 5);
  CHECK(d.feature_count() == 13);
  const FlowDataset again = generate_synthetic({1000, 0.995, 13, 4.0, 21});
  CHECK(testutil::to_vector(d.values()) == testutil::to_vector(again.values()));
  CHECK(std::equal(d.labels().begin(), d.labels().end(), again.labels().begin()));

  const FlowDataset big = generate_synthetic({20000, 0.5, 6, 3.0, 4});
  std::vector<double> mean0(6, 0.0), mean1(6, 0.0);
  for (std::size_t r = 0; r < big.size(); ++r) {
    auto& m = big.label(r) == FlowLabel::Attack ? mean1 : mean0;
    for (std::size_t j = 0; j < 6; ++j) m[j] += big.features(r)[j];
  }
  double dist = 0.0;
  for (std::size_t j = 0; j < 6; ++j) {
    const double diff = mean1[j] / double(big.count(FlowLabel::Attack)) - mean0[j] / double(big.count(FlowLabel::Normal));
    dist += diff * diff;
  }
  CHECK(std::sqrt(dist) == doctest::Approx(3.0).epsilon(0.03));
  CHECK_THROWS_AS(generate_synthetic({10, 0.01, 2, 1.0, 0}), std::invalid_argument);
}

TEST_CASE("manifest lines round trip and verify") {
  const auto dir = testutil::scratch_dir("manifest");
  { std::ofstream(dir / "a.bin", std::ios::binary) << "abc"; }
  const ManifestEntry e = digest_file(dir / "a.bin");
  const std::string line = to_json_line(e);
  CHECK(line.find("{\"source\":") == 0);
  CHECK(line.find("\"sha256\"") < line.find("\"bytes\""));
  CHECK(line.find("\"bytes\"") < line.find("\"timestamp\""));
  const ManifestEntry back = parse_manifest_line(line);
  CHECK(back.sha256 == e.sha256);
  CHECK(back.timestamp == e.timestamp);
  CHECK(e.timestamp.back() == 'Z');
  CHECK(verify_entry(e));

  const std::vector<ManifestEntry> entries{e, e};
  append_manifest(dir / "manifest.jsonl", entries);
  append_manifest(dir / "manifest.jsonl", std::span<const ManifestEntry>(entries.data(), 1));
  CHECK(read_manifest(dir / "manifest.jsonl").size() == 3);

  { std::ofstream(dir / "a.bin", std::ios::binary) << "abd"; }
  CHECK_FALSE(verify_entry(e));
  CHECK_THROWS_AS(parse_manifest_line(R"({"source":"x","sha256":"ABC","bytes":1,"timestamp":"t"})"), DataError);
  CHECK_THROWS_AS(parse_manifest_line("not json"), DataError);
  CHECK_THROWS_AS(digest_file(dir / "missing.bin"), DataError);
}
