#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pdeep/flow_data.hpp"
#include "pdeep/metrics.hpp"
#include "pdeep/mlp.hpp"
#include "pdeep/pso.hpp"

namespace pdeep {

// Tuning order is fixed: batch size, then epochs, then learning rate.
enum class Tunable { BatchSize = 0, Epochs = 1, LearningRate = 2 };
inline constexpr std::array<Tunable, 3> kTuningOrder{Tunable::BatchSize, Tunable::Epochs, Tunable::LearningRate};

std::string to_string(Tunable t);

/// Bounds of one hyperparameter. Integer spaces are searched continuously
/// and rounded at evaluation time; log spaces are searched over log10.
struct ParameterSpace {
  double lo = 0.0;
  double hi = 1.0;
  bool integer = false;
  bool log_scale = false;

  double search_lo() const;
  double search_hi() const;
  // Search coordinate -> hyperparameter value (rounded when integer).
  double to_value(double position) const;
};

struct SearchSpace {
  ParameterSpace batch_size{16.0, 4096.0, true, false};
  ParameterSpace epochs{1.0, 20.0, true, false};
  ParameterSpace learning_rate{1e-4, 0.5, false, true};

  const ParameterSpace& operator[](Tunable t) const;
  ParameterSpace& operator[](Tunable t);
  std::vector<std::string> violations() const;
};

struct TuneConfig {
  SearchSpace space;
  // Bounds and rng_seed are filled per stage.
  PsoConfig pso;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool cache = true;
};

struct EvaluationRecord {
  Tunable stage = Tunable::BatchSize;  // meaningless for the initial evaluation
  bool initial = false;
  Hyperparameters hp;
  double auc = 0.0;
  bool cache_hit = false;
  // Training hit a non-finite loss; auc is -inf.
  bool diverged = false;
};

struct StageResult {
  Tunable parameter = Tunable::BatchSize;
  PsoResult pso;
  Hyperparameters stage_best;
  double best_auc = 0.0;
  // The stage improved on the incumbent and overwrote its coordinate.
  bool accepted = false;
};

struct TuneResult {
  Hyperparameters initial;
  double initial_auc = 0.0;
  Hyperparameters tuned;
  double tuned_auc = 0.0;
  std::vector<StageResult> stages;
  std::vector<EvaluationRecord> log;
  std::size_t objective_calls = 0;  // requested by PSO, cache hits included
  std::size_t trainings = 0;        // actual train-evaluate cycles, initial included
  double duration_seconds = 0.0;
};

Hyperparameters with_value(Hyperparameters hp, Tunable t, double value);
double value_of(const Hyperparameters& hp, Tunable t);

// Validation AUC of a model trained from `model_config` (its init_seed) with
// `hp`; `seed` drives the mini-batch shuffle.
double objective_auc(const Hyperparameters& hp, const FlowDataset& train_set, const FlowDataset& validation_set,
                     const MlpConfig& model_config, std::uint64_t seed);

// Seeded stratified hold-out from the training partition.
std::pair<FlowDataset, FlowDataset> make_validation_split(const FlowDataset& train_partition,
                                                          double validation_fraction, std::uint64_t seed);

// Sequential one-coordinate PSO over batch size, epochs, learning rate.
TuneResult tune(const TuneConfig& config, const FlowDataset& train_set, const FlowDataset& validation_set,
                const MlpConfig& model_config);

struct FinalizeResult {
  TrainResult training;
  MetricsReport report;
};

FinalizeResult finalize(const Hyperparameters& tuned, const FlowDataset& full_train, const FlowDataset& test_set,
                        const MlpConfig& model_config, std::uint64_t shuffle_seed, double threshold = 0.5);

}  // namespace pdeep
