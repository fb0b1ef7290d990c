#include "pdeep/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <Eigen/Core>
#include <json.hpp>

#include "pdeep/compress.hpp"
#include "pdeep/error.hpp"
#include "pdeep/metrics.hpp"
#include "pdeep/random.hpp"
#include "pdeep/sha256.hpp"
#include "pdeep/tuner.hpp"

#ifndef PDEEP_VERSION
#define PDEEP_VERSION "0.0.0"
#endif

namespace pdeep {
namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output directory " + dir.string() + " is not writable");
}

struct Seeds {
  std::uint64_t master, split, validation, init, tuner, final_shuffle, synth;

  explicit Seeds(std::uint64_t m)
      : master(m),
        split(derive_seed(m, "split")),
        validation(derive_seed(m, "validation")),
        init(derive_seed(m, "init")),
        tuner(derive_seed(m, "tuner")),
        final_shuffle(derive_seed(m, "final_shuffle")),
        synth(derive_seed(m, "synth")) {}

  json to_json() const {
    return json{{"master", master},          {"split", split}, {"validation", validation},
                {"init", init},              {"tuner", tuner}, {"final_shuffle", final_shuffle},
                {"synth", synth}};
  }
};

json hp_json(const Hyperparameters& hp) {
  return json{{"batch_size", hp.batch_size}, {"epochs", hp.epochs}, {"learning_rate", hp.learning_rate}};
}

json reproducibility_block(const RunConfig& cfg, const Seeds& seeds) {
  json j;
  j["versions"] = {{"pdeep", PDEEP_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  j["seeds"] = seeds.to_json();
  j["config"] = cfg.echo;
  return j;
}

json data_counts(const FlowDataset& d) {
  return json{{"records", d.size()}, {"attack", d.count(FlowLabel::Attack)}, {"normal", d.count(FlowLabel::Normal)},
              {"features", d.feature_count()}};
}

void write_report(const fs::path& path, json report, RunSummary& summary) {
  report["timestamp"] = utc_timestamp_now();
  write_text(path, report.dump(2) + "\n");
  summary.artifacts.push_back(path);
}

// Digest every input before it is parsed.
std::vector<ManifestEntry> preserve(const std::vector<fs::path>& inputs, const fs::path& out_dir,
                                    RunSummary& summary, std::ostream& log) {
  std::vector<ManifestEntry> entries;
  for (const auto& p : inputs) {
    entries.push_back(digest_file(p));
    log << "sha256 " << entries.back().sha256 << "  " << p.string() << "\n";
  }
  const fs::path manifest = out_dir / "manifest.jsonl";
  append_manifest(manifest, entries);
  summary.artifacts.push_back(manifest);
  return entries;
}

json manifest_json(const std::vector<ManifestEntry>& entries) {
  json arr = json::array();
  for (const auto& e : entries) arr.push_back({{"source", e.source}, {"sha256", e.sha256}, {"bytes", e.bytes}});
  return arr;
}

struct PreparedData {
  LoadedFlows loaded;
  FlowDataset train_raw;
  FlowDataset test_raw;
  FlowDataset train;  // normalized with train statistics
  FlowDataset test;   // same statistics, clipped
  std::vector<ManifestEntry> manifest;
};

PreparedData prepare(const RunConfig& cfg, const Seeds& seeds, RunSummary& summary, std::ostream& log) {
  PreparedData d;
  d.manifest = preserve(cfg.inputs, cfg.output_dir, summary, log);
  d.loaded = load_csv(cfg.inputs.front(), cfg.csv);
  log << "loaded " << d.loaded.dataset.size() << " records, " << d.loaded.dataset.feature_count()
      << " features (normal='" << d.loaded.labels.normal_value << "', attack='" << d.loaded.labels.attack_value
      << "')\n";
  auto [train_raw, test_raw] = split(d.loaded.dataset, SplitSpec{cfg.train_fraction, seeds.split, cfg.stratified});
  d.train_raw = std::move(train_raw);
  d.test_raw = std::move(test_raw);
  d.train = min_max_normalize(d.train_raw);
  d.test = apply_normalization(d.test_raw, *d.train.normalization());

  const fs::path stats = cfg.output_dir / "normalization.json";
  write_text(stats, normalization_to_json(d.train.feature_names(), *d.train.normalization()));
  summary.artifacts.push_back(stats);
  const fs::path test_csv = cfg.output_dir / "test_partition.csv";
  write_csv(d.test_raw, test_csv, cfg.csv.label_column);
  summary.artifacts.push_back(test_csv);
  return d;
}

json label_json(const LabelMapping& m) {
  return json{{"normal", m.normal_value}, {"attack", m.attack_value}, {"explicit", m.explicit_mapping}};
}

MlpConfig model_config_for(const RunConfig& cfg, const FlowDataset& train, std::uint64_t init_seed) {
  MlpConfig mc;
  mc.layer_sizes.clear();
  mc.layer_sizes.push_back(train.feature_count());
  mc.layer_sizes.insert(mc.layer_sizes.end(), cfg.hidden_layers.begin(), cfg.hidden_layers.end());
  mc.layer_sizes.push_back(1);
  mc.class_weight_attack = cfg.class_weight_attack;
  if (cfg.class_weight_normal) {
    mc.class_weight_normal = *cfg.class_weight_normal;
  } else {
    const std::size_t normal = train.count(FlowLabel::Normal);
    const std::size_t attack = train.count(FlowLabel::Attack);
    if (normal == 0 || attack == 0) throw DataError("training partition lacks one class; set class_weight_normal");
    mc.class_weight_normal = cfg.class_weight_attack * static_cast<double>(attack) / static_cast<double>(normal);
  }
  mc.init_seed = init_seed;
  mc.validate();
  return mc;
}

json class_weight_json(const RunConfig& cfg, const MlpConfig& mc) {
  return json{{"normal", mc.class_weight_normal}, {"attack", mc.class_weight_attack},
              {"normal_rule", cfg.class_weight_normal ? "fixed" : "auto: attack/normal ratio of training partition"}};
}

json training_json(const TrainResult& t) {
  return json{{"initial_loss", t.initial_loss}, {"epoch_losses", t.epoch_losses}};
}

std::string evaluations_csv(const std::vector<EvaluationRecord>& log) {
  std::ostringstream out;
  out << "index,stage,batch_size,epochs,learning_rate,auc,cache_hit,diverged\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto& e = log[i];
    char lr[32];
    const auto [p, ec] = std::to_chars(lr, lr + sizeof lr, e.hp.learning_rate);
    char auc[32];
    const auto [q, ec2] = std::to_chars(auc, auc + sizeof auc, e.auc);
    out << i << ',' << (e.initial ? "initial" : to_string(e.stage)) << ',' << e.hp.batch_size << ',' << e.hp.epochs
        << ',' << std::string_view(lr, static_cast<std::size_t>(p - lr)) << ','
        << std::string_view(auc, static_cast<std::size_t>(q - auc)) << ',' << (e.cache_hit ? 1 : 0) << ','
        << (e.diverged ? 1 : 0) << '\n';
  }
  return out.str();
}

// Final model training, test evaluation and artifact writing shared by the
// tune, train and compress modes.
json finalize_and_write(const RunConfig& cfg, const fs::path& dir, const Hyperparameters& hp,
                        const FlowDataset& train, const FlowDataset& test, const MlpConfig& mc, const Seeds& seeds,
                        RunSummary& summary, std::ostream& log, json& timing) {
  const auto t0 = Clock::now();
  FinalizeResult fin = finalize(hp, train, test, mc, seeds.final_shuffle, cfg.threshold);
  timing["finalize_seconds"] = seconds_since(t0);

  const auto t1 = Clock::now();
  const auto scores = predict_batch(fin.training.model, test);
  const double elapsed = seconds_since(t1);
  timing["predict_records_per_second"] = elapsed > 0.0 ? static_cast<double>(test.size()) / elapsed : 0.0;
  log << "final model: accuracy " << fin.report.accuracy << ", fpr " << fin.report.fpr << ", auc "
      << (fin.report.auc ? *fin.report.auc : 0.0) << " (" << timing["predict_records_per_second"].get<double>()
      << " records/s inference)\n";

  const fs::path model_path = dir / "model.txt";
  save_model(fin.training.model, model_path);
  summary.artifacts.push_back(model_path);
  const fs::path metrics_path = dir / "metrics.json";
  write_text(metrics_path, metrics_to_json(fin.report) + "\n");
  summary.artifacts.push_back(metrics_path);

  json j;
  j["hyperparameters"] = hp_json(hp);
  j["training"] = training_json(fin.training);
  j["metrics"] = json::parse(metrics_to_json(fin.report));
  j["model_sha256"] = sha256_hex(model_to_text(fin.training.model));
  return j;
}

json tune_and_write(const RunConfig& cfg, const fs::path& dir, const FlowDataset& train, const FlowDataset& test,
                    const Seeds& seeds, RunSummary& summary, std::ostream& log, json& access) {
  json report;
  json timing;
  const MlpConfig mc = model_config_for(cfg, train, seeds.init);
  report["model"] = {{"layer_sizes", mc.layer_sizes},
                     {"hidden_activation", "relu"},
                     {"output_activation", "sigmoid"},
                     {"class_weights", class_weight_json(cfg, mc)}};

  auto [inner, validation] = make_validation_split(train, cfg.validation_fraction, seeds.validation);
  access.push_back("tune: training subset (" + std::to_string(inner.size()) + " records)");
  access.push_back("tune: validation subset (" + std::to_string(validation.size()) + " records)");
  report["tuning_data"] = {{"train", data_counts(inner)}, {"validation", data_counts(validation)}};

  TuneConfig tc;
  tc.space = cfg.space;
  tc.pso = cfg.pso;
  tc.seed = seeds.tuner;
  tc.threads = cfg.threads;
  tc.cache = cfg.cache;
  log << "tuning with " << tc.pso.n_particles << " particles x " << tc.pso.n_iterations << " iterations per "
      << "hyperparameter (" << to_string(tc.pso.variant) << " variant)\n";
  const TuneResult tr = tune(tc, inner, validation, mc);
  timing["tune_seconds"] = tr.duration_seconds;

  json stages = json::array();
  for (const auto& s : tr.stages) {
    const fs::path trace_path = dir / ("trace_" + to_string(s.parameter) + ".csv");
    write_text(trace_path, trace_to_csv(s.pso.trace));
    summary.artifacts.push_back(trace_path);
    json rows = json::array();
    for (const auto& r : s.pso.trace) {
      rows.push_back({r.iteration, r.particle, r.position, r.velocity,
                      std::isfinite(r.objective) ? json(r.objective) : json(nullptr), r.global_best});
    }
    stages.push_back({{"parameter", to_string(s.parameter)},
                      {"search_scale", tc.space[s.parameter].log_scale ? "log10" : "linear"},
                      {"best_position", s.pso.best_position},
                      {"stage_best", hp_json(s.stage_best)},
                      {"best_auc", s.best_auc},
                      {"accepted", s.accepted},
                      {"trace_columns", {"iteration", "particle", "position", "velocity", "objective", "global_best"}},
                      {"trace", rows}});
    log << "  " << to_string(s.parameter) << ": best auc " << s.best_auc << (s.accepted ? " (accepted)" : " (kept)")
        << "\n";
  }
  const fs::path eval_path = dir / "evaluations.csv";
  write_text(eval_path, evaluations_csv(tr.log));
  summary.artifacts.push_back(eval_path);

  std::size_t hits = 0;
  for (const auto& e : tr.log) hits += e.cache_hit ? 1 : 0;
  report["initial"] = {{"hyperparameters", hp_json(tr.initial)}, {"validation_auc", tr.initial_auc}};
  report["stages"] = stages;
  report["tuned"] = {{"hyperparameters", hp_json(tr.tuned)}, {"validation_auc", tr.tuned_auc}};
  report["evaluations"] = {{"objective_calls", tr.objective_calls}, {"trainings", tr.trainings}, {"cache_hits", hits}};

  access.push_back("finalize: full training partition (" + std::to_string(train.size()) + " records)");
  access.push_back("finalize: test partition (" + std::to_string(test.size()) + " records)");
  report["final"] = finalize_and_write(cfg, dir, tr.tuned, train, test, mc, seeds, summary, log, timing);
  report["timing"] = timing;
  return report;
}

json notes_json() {
  return json::array({"PSO compares objective values when updating local and global bests",
                      "two independent uniform draws r1, r2 per particle per iteration",
                      "integer hyperparameters are rounded at evaluation time only",
                      "learning rate is searched over log10(lr); reported values are linear",
                      "bests are merged after each iteration in particle-index order",
                      "a stage overwrites its hyperparameter only when it improves the validation AUC"});
}

RunSummary run_synth(const RunConfig& cfg, const Seeds& seeds, std::ostream& log) {
  RunSummary summary;
  SynthSpec spec = cfg.synth;
  spec.seed = seeds.synth;
  const FlowDataset d = generate_synthetic(spec);
  const fs::path out = cfg.output_dir / "synthetic.csv";
  write_csv(d, out, cfg.csv.label_column);
  summary.artifacts.push_back(out);
  log << "wrote " << d.size() << " records (" << d.count(FlowLabel::Attack) << " attack, "
      << d.count(FlowLabel::Normal) << " normal) to " << out.string() << "\n";
  preserve({out}, cfg.output_dir, summary, log);
  return summary;
}

RunSummary run_digest(const RunConfig& cfg, std::ostream& log) {
  RunSummary summary;
  preserve(cfg.inputs, cfg.output_dir, summary, log);
  return summary;
}

RunSummary run_ingest(const RunConfig& cfg, const Seeds& seeds, std::ostream& log) {
  RunSummary summary;
  PreparedData d = prepare(cfg, seeds, summary, log);
  const fs::path train_csv = cfg.output_dir / "train_normalized.csv";
  const fs::path test_csv = cfg.output_dir / "test_normalized.csv";
  write_csv(d.train, train_csv, cfg.csv.label_column);
  write_csv(d.test, test_csv, cfg.csv.label_column);
  summary.artifacts.push_back(train_csv);
  summary.artifacts.push_back(test_csv);
  json report;
  report["mode"] = "ingest";
  report["manifest"] = manifest_json(d.manifest);
  report["label_mapping"] = label_json(d.loaded.labels);
  report["data"] = {{"all", data_counts(d.loaded.dataset)}, {"train", data_counts(d.train)},
                    {"test", data_counts(d.test)}};
  report["reproducibility"] = reproducibility_block(cfg, seeds);
  write_report(cfg.output_dir / "report.json", report, summary);
  return summary;
}

RunSummary run_tune(const RunConfig& cfg, const Seeds& seeds, std::ostream& log) {
  RunSummary summary;
  json access = json::array();
  PreparedData d = prepare(cfg, seeds, summary, log);
  access.push_back("prepare: load, split, normalize with training statistics");
  json report;
  report["mode"] = "tune";
  report["manifest"] = manifest_json(d.manifest);
  report["label_mapping"] = label_json(d.loaded.labels);
  report["data"] = {{"all", data_counts(d.loaded.dataset)}, {"train", data_counts(d.train)},
                    {"test", data_counts(d.test)}};
  json body = tune_and_write(cfg, cfg.output_dir, d.train, d.test, seeds, summary, log, access);
  for (auto& [k, v] : body.items()) report[k] = v;
  report["data_access"] = access;
  report["notes"] = notes_json();
  report["reproducibility"] = reproducibility_block(cfg, seeds);
  write_report(cfg.output_dir / "report.json", report, summary);
  return summary;
}

RunSummary run_train(const RunConfig& cfg, const Seeds& seeds, std::ostream& log) {
  RunSummary summary;
  PreparedData d = prepare(cfg, seeds, summary, log);
  const MlpConfig mc = model_config_for(cfg, d.train, seeds.init);
  json timing;
  json report;
  report["mode"] = "train";
  report["manifest"] = manifest_json(d.manifest);
  report["label_mapping"] = label_json(d.loaded.labels);
  report["data"] = {{"all", data_counts(d.loaded.dataset)}, {"train", data_counts(d.train)},
                    {"test", data_counts(d.test)}};
  report["model"] = {{"layer_sizes", mc.layer_sizes}, {"class_weights", class_weight_json(cfg, mc)}};
  report["final"] = finalize_and_write(cfg, cfg.output_dir, cfg.hp, d.train, d.test, mc, seeds, summary, log, timing);
  report["timing"] = timing;
  report["reproducibility"] = reproducibility_block(cfg, seeds);
  write_report(cfg.output_dir / "report.json", report, summary);
  return summary;
}

RunSummary run_evaluate(const RunConfig& cfg, const Seeds& seeds, std::ostream& log) {
  RunSummary summary;
  const auto manifest = preserve(cfg.inputs, cfg.output_dir, summary, log);
  const MlpModel model = load_model(cfg.model_path);
  LoadedFlows loaded = load_csv(cfg.inputs.front(), cfg.csv);
  FlowDataset data = std::move(loaded.dataset);
  if (!cfg.normalization_path.empty()) {
    data = apply_normalization(data, normalization_from_json(read_text(cfg.normalization_path)));
  }
  if (!cfg.compression_path.empty()) data = compress(load_compression(cfg.compression_path), data);
  const auto scores = predict_batch(model, data);
  const MetricsReport m = evaluate_scores(scores, data.labels(), cfg.threshold);
  const fs::path metrics_path = cfg.output_dir / "metrics.json";
  write_text(metrics_path, metrics_to_json(m) + "\n");
  summary.artifacts.push_back(metrics_path);
  log << "evaluated " << data.size() << " records: accuracy " << m.accuracy << ", auc " << (m.auc ? *m.auc : 0.0)
      << "\n";
  json report;
  report["mode"] = "evaluate";
  report["manifest"] = manifest_json(manifest);
  report["model"] = cfg.model_path.string();
  report["model_sha256"] = sha256_hex(read_text(cfg.model_path));
  report["metrics"] = json::parse(metrics_to_json(m));
  report["reproducibility"] = reproducibility_block(cfg, seeds);
  write_report(cfg.output_dir / "report.json", report, summary);
  return summary;
}

// Same tuning pipeline twice: full feature set, then the single compressed feature.
RunSummary run_compress(const RunConfig& cfg, const Seeds& seeds, std::ostream& log) {
  RunSummary summary;
  PreparedData d = prepare(cfg, seeds, summary, log);
  json comparison;
  double auc_full = 0.0;
  double auc_compressed = 0.0;

  {
    const fs::path dir = cfg.output_dir / "uncompressed";
    ensure_dir(dir);
    json access = json::array();
    log << "[uncompressed] " << d.train.feature_count() << " features\n";
    json report = tune_and_write(cfg, dir, d.train, d.test, seeds, summary, log, access);
    report["data_access"] = access;
    report["reproducibility"] = reproducibility_block(cfg, seeds);
    auc_full = report["final"]["metrics"]["auc"].is_null() ? 0.0 : report["final"]["metrics"]["auc"].get<double>();
    comparison["uncompressed"] = report["final"]["metrics"];
    write_report(dir / "report.json", report, summary);
  }
  {
    const fs::path dir = cfg.output_dir / "compressed";
    ensure_dir(dir);
    const CompressionModel cm = fit_compression(d.train, cfg.reduction);
    save_compression(cm, dir / "compression.txt");
    summary.artifacts.push_back(dir / "compression.txt");
    const FlowDataset train_c = compress(cm, d.train);
    const FlowDataset test_c = compress(cm, d.test);
    json access = json::array();
    log << "[compressed] 1 feature (" << to_string(cfg.reduction) << " weights)\n";
    json report = tune_and_write(cfg, dir, train_c, test_c, seeds, summary, log, access);
    report["compression"] = {{"reduction", to_string(cm.reduction)}, {"weights", cm.weights},
                             {"output_range", {cm.output_min, cm.output_max}}};
    report["data_access"] = access;
    report["reproducibility"] = reproducibility_block(cfg, seeds);
    auc_compressed =
        report["final"]["metrics"]["auc"].is_null() ? 0.0 : report["final"]["metrics"]["auc"].get<double>();
    comparison["compressed"] = report["final"]["metrics"];
    write_report(dir / "report.json", report, summary);
  }
  comparison["mode"] = "compress";
  comparison["compressed_auc_le_uncompressed_auc"] = auc_compressed <= auc_full;
  comparison["reproducibility"] = reproducibility_block(cfg, seeds);
  write_report(cfg.output_dir / "comparison.json", comparison, summary);
  log << "final auc: uncompressed " << auc_full << ", compressed " << auc_compressed << "\n";
  return summary;
}

}  // namespace

std::string normalization_to_json(const std::vector<std::string>& names, const NormalizationStats& stats) {
  json arr = json::array();
  for (std::size_t j = 0; j < stats.size(); ++j) {
    arr.push_back({{"name", j < names.size() ? names[j] : "f" + std::to_string(j + 1)},
                   {"min", stats[j].min},
                   {"max", stats[j].max}});
  }
  return json{{"features", arr}}.dump(2) + "\n";
}

NormalizationStats normalization_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    NormalizationStats out;
    for (const auto& f : j.at("features")) out.push_back({f.at("min").get<double>(), f.at("max").get<double>()});
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed normalization file: ") + e.what());
  }
}

std::string strip_volatile(const std::string& report_json) {
  json j = json::parse(report_json);
  const auto strip = [](auto& self, json& node) -> void {
    if (node.is_object()) {
      node.erase("timestamp");
      node.erase("timing");
      for (auto& [k, v] : node.items()) self(self, v);
    } else if (node.is_array()) {
      for (auto& v : node) self(self, v);
    }
  };
  strip(strip, j);
  return j.dump();
}

RunSummary run_pipeline(const RunConfig& cfg, std::ostream& log) {
  ensure_dir(cfg.output_dir);
  const Seeds seeds(cfg.master_seed);
  switch (cfg.mode) {
    case Mode::Synth: return run_synth(cfg, seeds, log);
    case Mode::Digest: return run_digest(cfg, log);
    case Mode::Ingest: return run_ingest(cfg, seeds, log);
    case Mode::Tune: return run_tune(cfg, seeds, log);
    case Mode::Train: return run_train(cfg, seeds, log);
    case Mode::Evaluate: return run_evaluate(cfg, seeds, log);
    case Mode::Compress: return run_compress(cfg, seeds, log);
  }
  throw ConfigError("unknown mode");
}

int run(const RunConfig& cfg, std::ostream& log, std::ostream& err) {
  try {
    run_pipeline(cfg, log);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace pdeep
