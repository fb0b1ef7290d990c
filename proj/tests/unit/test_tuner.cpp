#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "helpers.hpp"
#include "pdeep/error.hpp"
#include "pdeep/tuner.hpp"

using namespace pdeep;

namespace {

struct Splits {
  FlowDataset train;
  FlowDataset validation;
};

Splits make_splits(std::size_t n, double attack_fraction, std::size_t features, double separation,
                   std::uint64_t seed) {
  const FlowDataset raw = generate_synthetic({n, attack_fraction, features, separation, seed});
  const FlowDataset norm = min_max_normalize(raw);
  auto [tr, va] = make_validation_split(norm, 0.25, seed + 1);
  return {std::move(tr), std::move(va)};
}

MlpConfig small_net(std::size_t inputs, double w0 = 1.0) {
  MlpConfig c;
  c.layer_sizes = {inputs, 8, 1};
  c.class_weight_normal = w0;
  c.init_seed = 5;
  return c;
}

TuneConfig small_tune(std::size_t particles, std::size_t iterations, bool cache = true) {
  TuneConfig t;
  t.space.batch_size = {8.0, 64.0, true, false};
  t.space.epochs = {1.0, 3.0, true, false};
  t.space.learning_rate = {1e-3, 0.3, false, true};
  t.pso.n_particles = particles;
  t.pso.n_iterations = iterations;
  t.seed = 17;
  t.cache = cache;
  return t;
}

bool is_integer(double v) { return std::floor(v) == v; }

}  // namespace

TEST_CASE("parameter spaces map search coordinates to values") {
  const ParameterSpace batch{16.0, 4096.0, true, false};
  CHECK(batch.to_value(731.6) == 732.0);
  CHECK(batch.to_value(5000.0) == 4096.0);
  const ParameterSpace lr{1e-4, 0.5, false, true};
  CHECK(lr.search_lo() == doctest::Approx(-4.0));
  CHECK(lr.search_hi() == doctest::Approx(std::log10(0.5)));
  CHECK(lr.to_value(-2.0) == doctest::Approx(0.01).epsilon(1e-14));
  CHECK(SearchSpace{}.violations().empty());
  SearchSpace bad;
  bad.learning_rate.hi = 1.5;
  bad.epochs = {1.0, 1.5, true, false};
  const auto v = bad.violations();
  CHECK(std::find(v.begin(), v.end(), "learning_rate hi must be < 1") != v.end());
  CHECK(v.size() == 2);
}

TEST_CASE("objective on indistinguishable classes is near chance") {
  const Splits s = make_splits(8000, 0.5, 4, 0.0, 3);
  for (const Hyperparameters& hp : {Hyperparameters{32, 2, 0.05}, Hyperparameters{256, 4, 0.2},
                                    Hyperparameters{16, 1, 0.001}}) {
    const double auc = objective_auc(hp, s.train, s.validation, small_net(4), 9);
    CHECK(std::abs(auc - 0.5) <= 0.05);
  }
}

TEST_CASE("objective on well separated classes") {
  const Splits s = make_splits(4000, 0.5, 13, 6.0, 4);
  auto mc = MlpConfig::deep_default(13);
  mc.class_weight_normal = 1.0;
  const Hyperparameters hp{32, 12, 0.01};
  const double auc = objective_auc(hp, s.train, s.validation, mc, 2);
  CHECK(auc > 0.95);
  CHECK(objective_auc(hp, s.train, s.validation, mc, 2) == auc);
}

TEST_CASE("validation split is a stratified quarter") {
  const FlowDataset d = min_max_normalize(generate_synthetic({1000, 0.9, 3, 1.0, 1}));
  const auto [tr, va] = make_validation_split(d, 0.25, 4);
  CHECK(va.size() == 250);
  CHECK(tr.size() == 750);
  CHECK(va.count(FlowLabel::Normal) == 25);
  CHECK_THROWS_AS(make_validation_split(d, 0.0, 4), std::invalid_argument);
}

TEST_CASE("uncached tuning makes 3 * particles * (iterations + 1) objective calls") {
  const Splits s = make_splits(600, 0.5, 4, 3.0, 5);
  const TuneResult r = tune(small_tune(3, 2, false), s.train, s.validation, small_net(4));
  CHECK(r.objective_calls == 3 * 3 * (2 + 1));
  CHECK(r.trainings == r.objective_calls + 1);
  CHECK(r.log.size() == r.objective_calls + 1);
  CHECK(r.stages.size() == 3);
  for (const auto& e : r.log) CHECK_FALSE(e.cache_hit);
  for (const auto& st : r.stages) CHECK(st.pso.evaluations == 3 * 3);
}

TEST_CASE("tuning log properties") {
  const Splits s = make_splits(600, 0.5, 4, 3.0, 6);
  const TuneConfig cfg = small_tune(4, 3);
  const TuneResult r = tune(cfg, s.train, s.validation, small_net(4));

  CHECK(r.log.front().initial);
  CHECK(r.log.front().hp == r.initial);
  CHECK(r.objective_calls == 3 * 4 * 4);
  CHECK(r.trainings <= r.objective_calls + 1);

  for (const auto& e : r.log) {
    // Integer hyperparameters are integral and inside their spaces.
    CHECK(is_integer(static_cast<double>(e.hp.batch_size)));
    CHECK(e.hp.batch_size >= 8);
    CHECK(e.hp.batch_size <= 64);
    CHECK(e.hp.epochs >= 1);
    CHECK(e.hp.epochs <= 3);
    CHECK(e.hp.learning_rate >= 1e-3);
    CHECK(e.hp.learning_rate <= 0.3);
  }

  // Cache hits repeat the value of the first evaluation of the same triple.
  std::size_t hits = 0;
  for (std::size_t i = 0; i < r.log.size(); ++i) {
    if (!r.log[i].cache_hit) continue;
    ++hits;
    const auto first = std::find_if(r.log.begin(), r.log.begin() + static_cast<long>(i),
                                    [&](const EvaluationRecord& e) { return e.hp == r.log[i].hp; });
    REQUIRE(first != r.log.begin() + static_cast<long>(i));
    CHECK(first->auc == r.log[i].auc);
  }
  CHECK(r.trainings + hits == r.objective_calls + 1);

  // Each stage varies one coordinate only.
  Hyperparameters incumbent = r.initial;
  for (const auto& st : r.stages) {
    for (const auto& e : r.log) {
      if (e.initial || e.stage != st.parameter) continue;
      for (Tunable other : kTuningOrder) {
        if (other != st.parameter) CHECK(value_of(e.hp, other) == value_of(incumbent, other));
      }
    }
    if (st.accepted) incumbent = st.stage_best;
  }
  CHECK(incumbent == r.tuned);

  // Monotone improvement.
  CHECK(r.tuned_auc >= r.initial_auc);
  double best_so_far = r.initial_auc;
  for (const auto& st : r.stages) {
    for (const auto& row : st.pso.trace) CHECK(st.best_auc >= row.global_best);
    best_so_far = std::max(best_so_far, st.best_auc);
  }
  CHECK(r.tuned_auc == best_so_far);
  double logged_max = -std::numeric_limits<double>::infinity();
  for (const auto& e : r.log) logged_max = std::max(logged_max, e.auc);
  CHECK(r.tuned_auc == logged_max);
}

TEST_CASE("degenerate swarm keeps the best evaluated state") {
  const Splits s = make_splits(600, 0.5, 4, 2.0, 7);
  const TuneResult r = tune(small_tune(1, 0), s.train, s.validation, small_net(4));
  CHECK(r.objective_calls == 3);
  CHECK(r.log.size() == 4);
  const auto best = std::max_element(r.log.begin(), r.log.end(),
                                     [](const EvaluationRecord& a, const EvaluationRecord& b) { return a.auc < b.auc; });
  CHECK(r.tuned_auc == best->auc);
  CHECK(r.tuned_auc >= r.initial_auc);
}

TEST_CASE("tuning is deterministic and thread-count independent") {
  const Splits s = make_splits(600, 0.5, 4, 3.0, 8);
  TuneConfig cfg = small_tune(3, 2);
  const TuneResult a = tune(cfg, s.train, s.validation, small_net(4));
  cfg.threads = 3;
  const TuneResult b = tune(cfg, s.train, s.validation, small_net(4));
  CHECK(a.tuned == b.tuned);
  CHECK(a.tuned_auc == b.tuned_auc);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) {
    CHECK(a.log[i].hp == b.log[i].hp);
    CHECK(a.log[i].auc == b.log[i].auc);
  }
  cfg.seed = 18;
  const TuneResult c = tune(cfg, s.train, s.validation, small_net(4));
  CHECK_FALSE(c.initial == a.initial);
}

TEST_CASE("diverging trainings are logged instead of aborting") {
  const Splits s = make_splits(400, 0.5, 3, 2.0, 9);
  MlpConfig mc;
  mc.layer_sizes = {3, 16, 16, 1};
  mc.class_weight_normal = 1e300;
  mc.class_weight_attack = 1e300;
  TuneConfig cfg = small_tune(2, 1);
  cfg.space.learning_rate = {0.5, 0.9, false, true};
  cfg.space.batch_size = {2.0, 4.0, true, false};
  cfg.space.epochs = {4.0, 6.0, true, false};
  TuneResult r;
  CHECK_NOTHROW(r = tune(cfg, s.train, s.validation, mc));
  std::size_t diverged = 0;
  for (const auto& e : r.log) diverged += e.diverged;
  CHECK(diverged > 0);
  for (const auto& e : r.log) {
    if (e.diverged) CHECK(e.auc == -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("batch search is capped by the training set size") {
  const Splits s = make_splits(200, 0.5, 3, 2.0, 10);
  TuneConfig cfg = small_tune(3, 1);
  cfg.space.batch_size = {16.0, 4096.0, true, false};
  const TuneResult r = tune(cfg, s.train, s.validation, small_net(3));
  for (const auto& e : r.log) CHECK(e.hp.batch_size <= s.train.size());
}

TEST_CASE("invalid tuning inputs") {
  const Splits s = make_splits(200, 0.5, 3, 2.0, 11);
  TuneConfig cfg = small_tune(2, 1);
  cfg.space.learning_rate.hi = 1.5;
  CHECK_THROWS_AS(tune(cfg, s.train, s.validation, small_net(3)), std::invalid_argument);
  CHECK_THROWS_AS(tune(small_tune(2, 1), s.train, s.validation, small_net(4)), DataError);
}

TEST_CASE("finalize trains on the full partition and scores the test set") {
  const FlowDataset raw = generate_synthetic({4000, 0.5, 13, 6.0, 12});
  auto [train_raw, test_raw] = split(raw, {0.8, 3, true});
  const FlowDataset train_set = min_max_normalize(train_raw);
  const FlowDataset test_set = apply_normalization(test_raw, *train_set.normalization());
  auto mc = MlpConfig::deep_default(13);
  mc.class_weight_normal = 1.0;
  const FinalizeResult f = finalize({32, 12, 0.01}, train_set, test_set, mc, 4);
  CHECK(f.report.counts.total() == test_set.size());
  CHECK(f.report.accuracy >= 0.95);
  CHECK(f.report.fpr <= 0.1);
  REQUIRE(f.report.auc);
  CHECK(*f.report.auc > 0.95);
  CHECK(f.training.epoch_losses.size() == 12);
}
