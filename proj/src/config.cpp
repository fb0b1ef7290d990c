#include "pdeep/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace pdeep {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Ingest: return "ingest";
    case Mode::Digest: return "digest";
    case Mode::Synth: return "synth";
    case Mode::Tune: return "tune";
    case Mode::Train: return "train";
    case Mode::Evaluate: return "evaluate";
    case Mode::Compress: return "compress";
  }
  return "unknown";
}

std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::Ingest, Mode::Digest, Mode::Synth, Mode::Tune, Mode::Train, Mode::Evaluate, Mode::Compress}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"input", "", "input file(s), comma separated"},
      {"output_dir", "pdeep-out", "directory for all artifacts"},
      {"label_column", "label", "name of the class column"},
      {"positive_label", "", "label value meaning attack (default: larger of the two values)"},
      {"ignore_columns", "", "comma separated columns to skip"},
      {"master_seed", "42", "seed all per-stage seeds derive from"},
      {"train_fraction", "0.8", "train share of the train/test split"},
      {"stratified", "true", "stratify the train/test split by class"},
      {"validation_fraction", "0.25", "share of the training partition held out for the tuning objective"},
      {"hidden_layers", "20,40,60,80,40,10", "hidden layer widths"},
      {"class_weight_normal", "4500", "loss weight of normal records, or 'auto' (attack/normal ratio)"},
      {"class_weight_attack", "1", "loss weight of attack records"},
      {"batch_lo", "16", "batch size search lower bound"},
      {"batch_hi", "4096", "batch size search upper bound"},
      {"epochs_lo", "1", "epochs search lower bound"},
      {"epochs_hi", "20", "epochs search upper bound"},
      {"lr_lo", "0.0001", "learning rate search lower bound"},
      {"lr_hi", "0.5", "learning rate search upper bound"},
      {"n_particles", "6", "particles per swarm"},
      {"n_iterations", "4", "swarm iterations per hyperparameter"},
      {"theta1", "2", "cognitive learning rate"},
      {"theta2", "2", "social learning rate"},
      {"pso_variant", "inertia", "original | inertia | constriction"},
      {"w_max", "0.9", "initial inertia weight"},
      {"w_min", "0.4", "final inertia weight"},
      {"v_max", "none", "velocity clamp, or 'none'"},
      {"constriction_form", "as_printed", "as_printed | standard"},
      {"cache", "true", "reuse results of identical hyperparameter triples"},
      {"threads", "1", "maximum concurrent trainings"},
      {"threshold", "0.5", "score threshold for the attack class"},
      {"batch_size", "732", "train mode: batch size"},
      {"epochs", "12", "train mode: epochs"},
      {"learning_rate", "0.0015", "train mode: learning rate"},
      {"synth_n", "20000", "synth mode: record count"},
      {"synth_attack_fraction", "0.995", "synth mode: attack share"},
      {"synth_features", "13", "synth mode: feature count"},
      {"synth_separation", "4", "synth mode: distance between class means"},
      {"model", "", "evaluate mode: model file"},
      {"normalization", "", "evaluate mode: normalization stats to apply"},
      {"compression", "", "evaluate mode: compression model to apply"},
      {"compression_reduction", "row_mean", "row_mean | global_mean"},
  };
  return keys;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = s.find(',', pos);
    out.emplace_back(trim(s.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

// Typed readers that record a message instead of throwing.
class Reader {
 public:
  Reader(const ConfigMap& m, std::vector<std::string>& errors) : map_(m), errors_(errors) {}

  std::string text(const std::string& key) const {
    const auto it = map_.find(key);
    return it == map_.end() ? std::string() : it->second;
  }

  double real(const std::string& key) {
    const std::string s = text(key);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
      errors_.push_back(key + ": expected a number, got '" + s + "'");
      return 0.0;
    }
    return v;
  }

  std::uint64_t uint(const std::string& key) {
    const std::string s = text(key);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
      errors_.push_back(key + ": expected a nonnegative integer, got '" + s + "'");
      return 0;
    }
    return v;
  }

  bool boolean(const std::string& key) {
    const std::string s = text(key);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    errors_.push_back(key + ": expected true or false, got '" + s + "'");
    return false;
  }

  void fail(std::string msg) { errors_.push_back(std::move(msg)); }

 private:
  const ConfigMap& map_;
  std::vector<std::string>& errors_;
};

}  // namespace

ConfigMap parse_config_text(std::string_view text, std::vector<std::string>& errors) {
  ConfigMap out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || trim(line.substr(0, eq)).empty()) {
      errors.push_back("config line " + std::to_string(line_no) + ": expected 'key = value'");
      continue;
    }
    out[std::string(trim(line.substr(0, eq)))] = std::string(trim(line.substr(eq + 1)));
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path, std::vector<std::string>& errors) {
  std::ifstream in(path);
  if (!in) {
    errors.push_back("cannot read config file " + path.string());
    return {};
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), errors);
}

ConfigMap merge_config(const ConfigMap& file, const ConfigMap& overrides) {
  ConfigMap merged;
  for (const auto& k : config_keys()) merged[k.name] = k.default_value;
  for (const auto& [k, v] : file) merged[k] = v;
  for (const auto& [k, v] : overrides) merged[k] = v;
  return merged;
}

ValidatedConfig validate_config(const ConfigMap& given, Mode mode) {
  ValidatedConfig out;
  std::vector<std::string>& errors = out.errors;
  const ConfigMap merged = merge_config({}, given);
  for (const auto& [k, v] : merged) {
    const auto& keys = config_keys();
    if (std::none_of(keys.begin(), keys.end(), [&](const ConfigKey& c) { return c.name == k; })) {
      errors.push_back("unknown key '" + k + "'");
    }
  }
  Reader r(merged, errors);
  RunConfig c;
  c.mode = mode;
  c.echo = merged;

  for (const auto& p : split_list(r.text("input"))) c.inputs.emplace_back(p);
  c.output_dir = r.text("output_dir");
  if (c.output_dir.empty()) r.fail("output_dir must not be empty");
  c.csv.label_column = r.text("label_column");
  if (c.csv.label_column.empty()) r.fail("label_column must not be empty");
  if (const auto pl = r.text("positive_label"); !pl.empty()) c.csv.positive_label = pl;
  c.csv.ignore_columns = split_list(r.text("ignore_columns"));
  c.master_seed = r.uint("master_seed");

  c.train_fraction = r.real("train_fraction");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) r.fail("train_fraction must lie strictly between 0 and 1");
  c.stratified = r.boolean("stratified");
  c.validation_fraction = r.real("validation_fraction");
  if (!(c.validation_fraction > 0.0 && c.validation_fraction < 1.0)) {
    r.fail("validation_fraction must lie strictly between 0 and 1");
  }

  for (const auto& w : split_list(r.text("hidden_layers"))) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc() || ptr != w.data() + w.size() || v == 0) {
      r.fail("hidden_layers: '" + w + "' is not a positive integer");
    } else {
      c.hidden_layers.push_back(v);
    }
  }
  if (c.hidden_layers.empty()) r.fail("hidden_layers needs at least one hidden layer");

  if (r.text("class_weight_normal") != "auto") {
    c.class_weight_normal = r.real("class_weight_normal");
    if (!(*c.class_weight_normal > 0.0)) r.fail("class_weight_normal must be positive");
  }
  c.class_weight_attack = r.real("class_weight_attack");
  if (!(c.class_weight_attack > 0.0)) r.fail("class_weight_attack must be positive");

  c.space.batch_size = {r.real("batch_lo"), r.real("batch_hi"), true, false};
  c.space.epochs = {r.real("epochs_lo"), r.real("epochs_hi"), true, false};
  c.space.learning_rate = {r.real("lr_lo"), r.real("lr_hi"), false, true};
  for (auto& v : c.space.violations()) r.fail(std::move(v));

  c.pso.n_particles = r.uint("n_particles");
  c.pso.n_iterations = r.uint("n_iterations");
  c.pso.theta1 = r.real("theta1");
  c.pso.theta2 = r.real("theta2");
  if (const auto v = parse_pso_variant(r.text("pso_variant"))) {
    c.pso.variant = *v;
  } else {
    r.fail("pso_variant must be original, inertia or constriction");
  }
  c.pso.w_max = r.real("w_max");
  c.pso.w_min = r.real("w_min");
  if (r.text("v_max") != "none") c.pso.v_max = r.real("v_max");
  if (const auto f = parse_constriction_form(r.text("constriction_form"))) {
    c.pso.constriction_form = *f;
  } else {
    r.fail("constriction_form must be as_printed or standard");
  }
  // Bounds are set per stage by the tuner; validate the rest here.
  c.pso.lo = 0.0;
  c.pso.hi = 1.0;
  for (auto& v : c.pso.violations()) r.fail(std::move(v));

  c.cache = r.boolean("cache");
  c.threads = r.uint("threads");
  if (c.threads == 0) r.fail("threads must be >= 1");
  c.threshold = r.real("threshold");

  c.hp.batch_size = r.uint("batch_size");
  c.hp.epochs = r.uint("epochs");
  c.hp.learning_rate = r.real("learning_rate");
  if (mode == Mode::Train) {
    if (c.hp.batch_size < 1) r.fail("batch_size must be >= 1");
    if (c.hp.epochs < 1) r.fail("epochs must be >= 1");
    if (!(c.hp.learning_rate > 0.0 && c.hp.learning_rate < 1.0)) r.fail("learning_rate must be < 1 and > 0");
  }

  c.synth.n = r.uint("synth_n");
  c.synth.attack_fraction = r.real("synth_attack_fraction");
  c.synth.feature_count = r.uint("synth_features");
  c.synth.separation = r.real("synth_separation");
  if (mode == Mode::Synth) {
    if (c.synth.n < 2) r.fail("synth_n must be >= 2");
    if (c.synth.feature_count == 0) r.fail("synth_features must be >= 1");
    if (!(c.synth.separation >= 0.0)) r.fail("synth_separation must be nonnegative");
    const double n_attack = std::round(c.synth.attack_fraction * static_cast<double>(c.synth.n));
    if (!(c.synth.attack_fraction > 0.0 && c.synth.attack_fraction < 1.0) || n_attack < 1.0 ||
        n_attack > static_cast<double>(c.synth.n) - 1.0) {
      r.fail("synth_attack_fraction leaves a class empty");
    }
  }

  c.model_path = r.text("model");
  c.normalization_path = r.text("normalization");
  c.compression_path = r.text("compression");
  const auto red = r.text("compression_reduction");
  if (red == "row_mean") {
    c.reduction = WeightReduction::RowMean;
  } else if (red == "global_mean") {
    c.reduction = WeightReduction::GlobalMean;
  } else {
    r.fail("compression_reduction must be row_mean or global_mean");
  }

  const bool needs_input = mode != Mode::Synth;
  if (needs_input && c.inputs.empty()) r.fail("input is required for " + to_string(mode));
  if (mode != Mode::Digest && mode != Mode::Synth && c.inputs.size() > 1) {
    r.fail(to_string(mode) + " takes exactly one input file");
  }
  if (mode == Mode::Evaluate && c.model_path.empty()) r.fail("model is required for evaluate");

  if (errors.empty()) out.config = std::move(c);
  return out;
}

}  // namespace pdeep
