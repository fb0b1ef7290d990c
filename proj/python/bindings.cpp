#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pdeep/compress.hpp"
#include "pdeep/error.hpp"
#include "pdeep/flow_data.hpp"
#include "pdeep/metrics.hpp"
#include "pdeep/mlp.hpp"
#include "pdeep/pso.hpp"
#include "pdeep/sha256.hpp"
#include "pdeep/tuner.hpp"

namespace py = pybind11;
using namespace pdeep;

namespace {

std::vector<FlowLabel> to_labels(const std::vector<int>& ints) {
  std::vector<FlowLabel> out;
  out.reserve(ints.size());
  for (int v : ints) {
    if (v != 0 && v != 1) throw py::value_error("labels must be 0 or 1");
    out.push_back(v ? FlowLabel::Attack : FlowLabel::Normal);
  }
  return out;
}

std::vector<int> from_labels(std::span<const FlowLabel> labels) {
  std::vector<int> out;
  out.reserve(labels.size());
  for (FlowLabel l : labels) out.push_back(l == FlowLabel::Attack ? 1 : 0);
  return out;
}

FlowDataset make_dataset(const std::vector<std::vector<double>>& rows, const std::vector<int>& labels,
                         std::optional<std::vector<std::string>> names) {
  if (rows.size() != labels.size()) throw py::value_error("rows and labels differ in length");
  const std::size_t width = rows.empty() ? (names ? names->size() : 0) : rows.front().size();
  std::vector<std::string> n;
  if (names) {
    n = *names;
  } else {
    for (std::size_t j = 0; j < width; ++j) n.push_back("f" + std::to_string(j + 1));
  }
  const auto l = to_labels(labels);
  std::vector<FlowRecord> records;
  records.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) records.push_back({rows[i], l[i]});
  return FlowDataset(std::move(n), records);
}

std::vector<std::vector<double>> rows_of(const FlowDataset& d) {
  std::vector<std::vector<double>> out;
  out.reserve(d.size());
  for (std::size_t r = 0; r < d.size(); ++r) {
    auto f = d.features(r);
    out.emplace_back(f.begin(), f.end());
  }
  return out;
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["accuracy"] = m.accuracy;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["fpr"] = m.fpr;
  d["fnr"] = m.fnr;
  d["f_measure"] = m.f_measure;
  d["auc"] = m.auc ? py::cast(*m.auc) : py::none();
  d["threshold"] = m.threshold;
  d["tp"] = m.counts.tp;
  d["tn"] = m.counts.tn;
  d["fp"] = m.counts.fp;
  d["fn"] = m.counts.fn;
  d["undefined"] = m.undefined;
  return d;
}

py::dict hp_dict(const Hyperparameters& hp) {
  py::dict d;
  d["batch_size"] = hp.batch_size;
  d["epochs"] = hp.epochs;
  d["learning_rate"] = hp.learning_rate;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Particle-swarm tuned MLP pipeline for network-flow forensics";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  // --- preservation
  m.def("sha256_hex", [](py::bytes data) { return sha256_hex(std::string_view(data)); });
  m.def("digest_file", [](const std::filesystem::path& p) {
    const ManifestEntry e = digest_file(p);
    py::dict d;
    d["source"] = e.source;
    d["sha256"] = e.sha256;
    d["bytes"] = e.bytes;
    d["timestamp"] = e.timestamp;
    return d;
  });

  // --- flow data
  py::class_<FlowDataset>(m, "FlowDataset")
      .def(py::init(&make_dataset), py::arg("rows"), py::arg("labels"), py::arg("feature_names") = py::none())
      .def("__len__", &FlowDataset::size)
      .def_property_readonly("feature_count", &FlowDataset::feature_count)
      .def_property_readonly("feature_names", &FlowDataset::feature_names)
      .def_property_readonly("rows", &rows_of)
      .def_property_readonly("labels", [](const FlowDataset& d) { return from_labels(d.labels()); })
      .def_property_readonly("normalization", [](const FlowDataset& d) -> py::object {
        if (!d.normalization()) return py::none();
        py::list out;
        for (const auto& r : *d.normalization()) out.append(py::make_tuple(r.min, r.max));
        return out;
      });

  m.def(
      "load_csv",
      [](const std::filesystem::path& path, const std::string& label_column, std::optional<std::string> positive) {
        CsvOptions o;
        o.label_column = label_column;
        o.positive_label = std::move(positive);
        LoadedFlows l = load_csv(path, o);
        return py::make_tuple(std::move(l.dataset), py::dict(py::arg("normal") = l.labels.normal_value,
                                                             py::arg("attack") = l.labels.attack_value));
      },
      py::arg("path"), py::arg("label_column") = "label", py::arg("positive_label") = py::none());
  m.def(
      "generate_synthetic",
      [](std::size_t n, double attack_fraction, std::size_t feature_count, double separation, std::uint64_t seed) {
        return generate_synthetic(SynthSpec{n, attack_fraction, feature_count, separation, seed});
      },
      py::arg("n"), py::arg("attack_fraction"), py::arg("feature_count"), py::arg("separation"), py::arg("seed"));
  m.def("min_max_normalize", &min_max_normalize);
  m.def("apply_normalization", [](const FlowDataset& d, const std::vector<std::pair<double, double>>& stats) {
    NormalizationStats s;
    for (const auto& [lo, hi] : stats) s.push_back({lo, hi});
    return apply_normalization(d, s);
  });
  m.def(
      "split",
      [](const FlowDataset& d, double train_fraction, std::uint64_t seed, bool stratified) {
        return split(d, SplitSpec{train_fraction, seed, stratified});
      },
      py::arg("dataset"), py::arg("train_fraction") = 0.8, py::arg("seed") = 0, py::arg("stratified") = true);

  // --- mlp
  py::class_<MlpConfig>(m, "MlpConfig")
      .def(py::init<>())
      .def_readwrite("layer_sizes", &MlpConfig::layer_sizes)
      .def_readwrite("class_weight_normal", &MlpConfig::class_weight_normal)
      .def_readwrite("class_weight_attack", &MlpConfig::class_weight_attack)
      .def_readwrite("init_seed", &MlpConfig::init_seed)
      .def_static("deep_default", &MlpConfig::deep_default);
  py::class_<Hyperparameters>(m, "Hyperparameters")
      .def(py::init([](std::size_t b, std::size_t e, double lr) { return Hyperparameters{b, e, lr}; }),
           py::arg("batch_size"), py::arg("epochs"), py::arg("learning_rate"))
      .def_readwrite("batch_size", &Hyperparameters::batch_size)
      .def_readwrite("epochs", &Hyperparameters::epochs)
      .def_readwrite("learning_rate", &Hyperparameters::learning_rate);
  py::class_<MlpModel>(m, "MlpModel")
      .def_property_readonly("config", &MlpModel::config)
      .def("to_text", &model_to_text)
      .def_static("from_text", [](const std::string& t) { return model_from_text(t); });

  m.def("glorot_bound", &glorot_bound);
  m.def("init_model", &init_model);
  m.def("forward", [](const MlpModel& model, const std::vector<double>& x) { return forward(model, x); });
  m.def("predict_batch", &predict_batch);
  m.def("weighted_logistic_loss",
        [](const std::vector<int>& y, const std::vector<double>& p, double w0, double w1) {
          return weighted_logistic_loss(to_labels(y), p, w0, w1);
        });
  m.def(
      "train",
      [](const MlpModel& model, const FlowDataset& d, const Hyperparameters& hp, std::uint64_t seed) {
        TrainResult r = [&] {
          py::gil_scoped_release release;
          return train(model, d, hp, seed);
        }();
        return py::make_tuple(std::move(r.model), r.initial_loss, r.epoch_losses);
      },
      py::arg("model"), py::arg("train_set"), py::arg("hp"), py::arg("shuffle_seed"));

  // --- metrics
  m.def(
      "confusion",
      [](const std::vector<double>& s, const std::vector<int>& y, double t) {
        const ConfusionMatrix c = confusion(s, to_labels(y), t);
        return py::dict(py::arg("tp") = c.tp, py::arg("tn") = c.tn, py::arg("fp") = c.fp, py::arg("fn") = c.fn);
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);
  m.def(
      "compute_metrics",
      [](std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn, double threshold) {
        return metrics_dict(compute_metrics(ConfusionMatrix{tp, tn, fp, fn}, threshold));
      },
      py::arg("tp"), py::arg("tn"), py::arg("fp"), py::arg("fn"), py::arg("threshold") = 0.5);
  m.def("roc_auc", [](const std::vector<double>& s, const std::vector<int>& y) { return roc_auc(s, to_labels(y)); });
  m.def(
      "evaluate_scores",
      [](const std::vector<double>& s, const std::vector<int>& y, double t) {
        return metrics_dict(evaluate_scores(s, to_labels(y), t));
      },
      py::arg("scores"), py::arg("labels"), py::arg("threshold") = 0.5);

  // --- pso
  py::enum_<PsoVariant>(m, "PsoVariant")
      .value("original", PsoVariant::Original)
      .value("inertia", PsoVariant::Inertia)
      .value("constriction", PsoVariant::Constriction);
  py::enum_<ConstrictionForm>(m, "ConstrictionForm")
      .value("as_printed", ConstrictionForm::AsPrinted)
      .value("standard", ConstrictionForm::Standard);
  py::class_<PsoConfig>(m, "PsoConfig")
      .def(py::init<>())
      .def_readwrite("n_particles", &PsoConfig::n_particles)
      .def_readwrite("n_iterations", &PsoConfig::n_iterations)
      .def_readwrite("theta1", &PsoConfig::theta1)
      .def_readwrite("theta2", &PsoConfig::theta2)
      .def_readwrite("variant", &PsoConfig::variant)
      .def_readwrite("w_max", &PsoConfig::w_max)
      .def_readwrite("w_min", &PsoConfig::w_min)
      .def_readwrite("v_max", &PsoConfig::v_max)
      .def_readwrite("constriction_form", &PsoConfig::constriction_form)
      .def_readwrite("lo", &PsoConfig::lo)
      .def_readwrite("hi", &PsoConfig::hi)
      .def_readwrite("rng_seed", &PsoConfig::rng_seed);

  m.def("inertia_at", &inertia_at);
  m.def("constriction_factor", &constriction_factor, py::arg("theta1"), py::arg("theta2"),
        py::arg("form") = ConstrictionForm::AsPrinted);
  m.def("maximize", [](const std::function<double(double)>& f, const PsoConfig& cfg) {
    const PsoResult r = maximize(Objective(f), cfg, 1);
    py::list trace;
    for (const auto& t : r.trace) {
      trace.append(py::make_tuple(t.iteration, t.particle, t.position, t.velocity, t.objective, t.global_best));
    }
    return py::make_tuple(r.best_position, r.best_value, trace);
  });

  // --- tuner
  m.def("objective_auc", &objective_auc, py::arg("hp"), py::arg("train_set"), py::arg("validation_set"),
        py::arg("model_config"), py::arg("seed"));
  m.def(
      "tune",
      [](const FlowDataset& train_set, const FlowDataset& validation_set, const MlpConfig& model_config,
         const PsoConfig& pso, std::uint64_t seed) {
        TuneConfig tc;
        tc.pso = pso;
        tc.seed = seed;
        TuneResult r = [&] {
          py::gil_scoped_release release;
          return tune(tc, train_set, validation_set, model_config);
        }();
        py::dict d;
        d["initial"] = hp_dict(r.initial);
        d["initial_auc"] = r.initial_auc;
        d["tuned"] = hp_dict(r.tuned);
        d["tuned_auc"] = r.tuned_auc;
        py::list stages;
        for (const auto& s : r.stages) stages.append(py::make_tuple(to_string(s.parameter), s.best_auc, s.accepted));
        d["stages"] = stages;
        d["objective_calls"] = r.objective_calls;
        d["trainings"] = r.trainings;
        return d;
      },
      py::arg("train_set"), py::arg("validation_set"), py::arg("model_config"), py::arg("pso"), py::arg("seed"));

  // --- compression
  py::class_<CompressionModel>(m, "CompressionModel")
      .def_readonly("means", &CompressionModel::means)
      .def_readonly("stddevs", &CompressionModel::stddevs)
      .def_readonly("weights", &CompressionModel::weights)
      .def_readonly("output_min", &CompressionModel::output_min)
      .def_readonly("output_max", &CompressionModel::output_max);
  m.def("fit_compression", [](const FlowDataset& d) { return fit_compression(d); });
  m.def("compress", &compress);
}
