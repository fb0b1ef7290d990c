#include "pdeep/tuner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "pdeep/error.hpp"
#include "pdeep/random.hpp"
#include "text_io.hpp"

namespace pdeep {

std::string to_string(Tunable t) {
  switch (t) {
    case Tunable::BatchSize: return "batch_size";
    case Tunable::Epochs: return "epochs";
    case Tunable::LearningRate: return "learning_rate";
  }
  return "unknown";
}

double ParameterSpace::search_lo() const { return log_scale ? std::log10(lo) : lo; }
double ParameterSpace::search_hi() const { return log_scale ? std::log10(hi) : hi; }

double ParameterSpace::to_value(double position) const {
  double v = log_scale ? std::pow(10.0, position) : position;
  if (integer) v = std::round(v);
  return std::clamp(v, lo, hi);
}

const ParameterSpace& SearchSpace::operator[](Tunable t) const {
  switch (t) {
    case Tunable::BatchSize: return batch_size;
    case Tunable::Epochs: return epochs;
    case Tunable::LearningRate: return learning_rate;
  }
  throw std::out_of_range("unknown tunable");
}

ParameterSpace& SearchSpace::operator[](Tunable t) {
  return const_cast<ParameterSpace&>(std::as_const(*this)[t]);
}

std::vector<std::string> SearchSpace::violations() const {
  std::vector<std::string> out;
  for (Tunable t : kTuningOrder) {
    const ParameterSpace& s = (*this)[t];
    const std::string name = to_string(t);
    if (!std::isfinite(s.lo) || !std::isfinite(s.hi) || !(s.lo < s.hi)) {
      out.push_back(name + " bounds need finite lo < hi");
      continue;
    }
    if (s.integer && s.hi - s.lo < 1.0) out.push_back(name + " integer range must span at least 1");
    if (s.log_scale && !(s.lo > 0.0)) out.push_back(name + " log-scale lo must be positive");
  }
  if (batch_size.lo < 1.0) out.emplace_back("batch_size lo must be >= 1");
  if (epochs.lo < 1.0) out.emplace_back("epochs lo must be >= 1");
  if (!(learning_rate.lo > 0.0)) out.emplace_back("learning_rate lo must be > 0");
  if (!(learning_rate.hi < 1.0)) out.emplace_back("learning_rate hi must be < 1");
  return out;
}

Hyperparameters with_value(Hyperparameters hp, Tunable t, double value) {
  switch (t) {
    case Tunable::BatchSize: hp.batch_size = static_cast<std::size_t>(std::llround(value)); break;
    case Tunable::Epochs: hp.epochs = static_cast<std::size_t>(std::llround(value)); break;
    case Tunable::LearningRate: hp.learning_rate = value; break;
  }
  return hp;
}

double value_of(const Hyperparameters& hp, Tunable t) {
  switch (t) {
    case Tunable::BatchSize: return static_cast<double>(hp.batch_size);
    case Tunable::Epochs: return static_cast<double>(hp.epochs);
    case Tunable::LearningRate: return hp.learning_rate;
  }
  return 0.0;
}

double objective_auc(const Hyperparameters& hp, const FlowDataset& train_set, const FlowDataset& validation_set,
                     const MlpConfig& model_config, std::uint64_t seed) {
  const MlpModel fresh = init_model(model_config);
  const TrainResult trained = train(fresh, train_set, hp, seed);
  const std::vector<double> scores = predict_batch(trained.model, validation_set);
  return roc_auc(scores, validation_set.labels());
}

std::pair<FlowDataset, FlowDataset> make_validation_split(const FlowDataset& train_partition,
                                                          double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw std::invalid_argument("validation_fraction must lie strictly between 0 and 1");
  }
  return split(train_partition, SplitSpec{1.0 - validation_fraction, seed, true});
}

namespace {

using CacheKey = std::tuple<std::size_t, std::size_t, std::uint64_t>;

CacheKey key_of(const Hyperparameters& hp) {
  return {hp.batch_size, hp.epochs, std::bit_cast<std::uint64_t>(hp.learning_rate)};
}

struct Outcome {
  double auc = 0.0;
  bool diverged = false;
};

// Owns the objective cache and the evaluation log for one tuning run.
class Evaluator {
 public:
  Evaluator(const FlowDataset& train_set, const FlowDataset& validation_set, const MlpConfig& model_config,
            std::uint64_t shuffle_seed, std::size_t threads, bool use_cache)
      : train_(train_set),
        validation_(validation_set),
        model_config_(model_config),
        shuffle_seed_(shuffle_seed),
        threads_(std::max<std::size_t>(threads, 1)),
        use_cache_(use_cache) {}

  // Evaluates in index order; duplicates within the batch and cached triples
  // are not retrained. Fresh triples train concurrently.
  std::vector<double> evaluate(std::span<const Hyperparameters> batch, Tunable stage, bool initial) {
    std::vector<std::size_t> fresh;
    std::vector<bool> hit(batch.size(), false);
    std::map<CacheKey, std::size_t> pending;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const CacheKey key = key_of(batch[i]);
      if (use_cache_ && (cache_.contains(key) || pending.contains(key))) {
        hit[i] = true;
      } else {
        pending.emplace(key, i);
        fresh.push_back(i);
      }
    }

    std::vector<Outcome> computed(fresh.size());
    run_parallel(fresh.size(), [&](std::size_t f) { computed[f] = train_once(batch[fresh[f]]); });
    trainings_ += fresh.size();

    std::map<CacheKey, Outcome> local;
    for (std::size_t f = 0; f < fresh.size(); ++f) {
      const CacheKey key = key_of(batch[fresh[f]]);
      local[key] = computed[f];
      if (use_cache_) cache_[key] = computed[f];
    }

    std::vector<double> values(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const CacheKey key = key_of(batch[i]);
      const Outcome o = use_cache_ ? cache_.at(key) : local.at(key);
      values[i] = o.auc;
      log_.push_back({stage, initial, batch[i], o.auc, hit[i], o.diverged});
    }
    return values;
  }

  std::vector<EvaluationRecord>& log() { return log_; }
  std::size_t trainings() const { return trainings_; }

 private:
  Outcome train_once(const Hyperparameters& hp) const {
    try {
      return {objective_auc(hp, train_, validation_, model_config_, shuffle_seed_), false};
    } catch (const NumericError&) {
      return {-std::numeric_limits<double>::infinity(), true};
    }
  }

  template <typename Fn>
  void run_parallel(std::size_t count, Fn&& fn) const {
    const std::size_t workers = std::min(threads_, count);
    if (workers <= 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  const FlowDataset& train_;
  const FlowDataset& validation_;
  const MlpConfig& model_config_;
  std::uint64_t shuffle_seed_;
  std::size_t threads_;
  bool use_cache_;
  std::map<CacheKey, Outcome> cache_;
  std::vector<EvaluationRecord> log_;
  std::size_t trainings_ = 0;
};

}  // namespace

TuneResult tune(const TuneConfig& config, const FlowDataset& train_set, const FlowDataset& validation_set,
                const MlpConfig& model_config) {
  const auto started = std::chrono::steady_clock::now();
  model_config.validate();
  if (const auto v = config.space.violations(); !v.empty()) {
    std::string msg = "invalid search space:";
    for (const auto& s : v) msg += " " + s + ";";
    throw std::invalid_argument(msg);
  }
  if (train_set.empty() || validation_set.empty()) throw DataError("tuning needs nonempty train and validation sets");

  SearchSpace space = config.space;
  // Batches larger than the training set are rejected by train().
  space.batch_size.hi = std::min(space.batch_size.hi, static_cast<double>(train_set.size()));
  if (space.batch_size.hi - space.batch_size.lo < 1.0) {
    throw DataError("training set too small for the batch_size search space");
  }

  Evaluator evaluator(train_set, validation_set, model_config, derive_seed(config.seed, "train_shuffle"),
                      config.threads, config.cache);

  TuneResult result;
  Rng init_rng(derive_seed(config.seed, "initial_state"));
  Hyperparameters current;
  for (Tunable t : kTuningOrder) {
    const ParameterSpace& s = space[t];
    current = with_value(current, t, s.to_value(init_rng.uniform(s.search_lo(), s.search_hi())));
  }
  result.initial = current;
  result.initial_auc = evaluator.evaluate(std::span(&current, 1), Tunable::BatchSize, true).front();
  double current_auc = result.initial_auc;

  for (Tunable t : kTuningOrder) {
    const ParameterSpace& s = space[t];
    PsoConfig pso = config.pso;
    pso.lo = s.search_lo();
    pso.hi = s.search_hi();
    pso.rng_seed = derive_seed(config.seed, "pso/" + to_string(t));

    const Hyperparameters incumbent = current;
    BatchObjective objective = [&](std::span<const double> positions) {
      std::vector<Hyperparameters> batch;
      batch.reserve(positions.size());
      for (double x : positions) batch.push_back(with_value(incumbent, t, s.to_value(x)));
      return evaluator.evaluate(batch, t, false);
    };

    StageResult stage;
    stage.parameter = t;
    stage.pso = maximize(objective, pso);
    stage.stage_best = with_value(incumbent, t, s.to_value(stage.pso.best_position));
    stage.best_auc = stage.pso.best_value;
    result.objective_calls += stage.pso.evaluations;
    if (stage.best_auc > current_auc) {
      current = stage.stage_best;
      current_auc = stage.best_auc;
      stage.accepted = true;
    }
    result.stages.push_back(std::move(stage));
  }

  result.tuned = current;
  result.tuned_auc = current_auc;
  result.log = std::move(evaluator.log());
  result.trainings = evaluator.trainings();
  result.duration_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

FinalizeResult finalize(const Hyperparameters& tuned, const FlowDataset& full_train, const FlowDataset& test_set,
                        const MlpConfig& model_config, std::uint64_t shuffle_seed, double threshold) {
  tuned.validate();
  FinalizeResult out{train(init_model(model_config), full_train, tuned, shuffle_seed), {}};
  const std::vector<double> scores = predict_batch(out.training.model, test_set);
  out.report = evaluate_scores(scores, test_set.labels(), threshold);
  return out;
}

}  // namespace pdeep
