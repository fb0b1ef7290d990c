#include <algorithm>
#include <chrono>
#include <cmath>

#include "doctest.h"
#include "pdeep/pso.hpp"

using namespace pdeep;

namespace {

PsoConfig config_for(PsoVariant variant, std::uint64_t seed, double lo = 0.0, double hi = 10.0) {
  PsoConfig c;
  c.variant = variant;
  c.rng_seed = seed;
  c.lo = lo;
  c.hi = hi;
  if (variant == PsoVariant::Constriction) {
    c.theta1 = 2.05;
    c.theta2 = 2.05;
    c.constriction_form = ConstrictionForm::Standard;
  }
  return c;
}

double quadratic(double x) { return -(x - 3.0) * (x - 3.0); }

}  // namespace

TEST_CASE("inertia schedule") {
  CHECK(inertia_at(0, 10, 0.9, 0.4) == 0.9);
  CHECK(inertia_at(10, 10, 0.9, 0.4) == 0.4);
  CHECK(inertia_at(5, 10, 0.9, 0.4) == doctest::Approx(0.65).epsilon(1e-15));
  CHECK_THROWS_AS(inertia_at(0, 0, 0.9, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(inertia_at(0, 4, 0.3, 0.4), std::invalid_argument);
  CHECK_THROWS_AS(inertia_at(5, 4, 0.9, 0.4), std::invalid_argument);
}

TEST_CASE("constriction factor") {
  CHECK(std::abs(constriction_factor(2.05, 2.05) - 2.70154) < 1e-4);
  CHECK(std::abs(constriction_factor(2.05, 2.05, ConstrictionForm::Standard) - 0.72984) < 1e-4);
  CHECK(std::abs(constriction_factor(2.5, 2.5) - 0.61803) < 1e-5);
  CHECK_THROWS_AS(constriction_factor(2.0, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(constriction_factor(1.0, 1.5), std::invalid_argument);
}

TEST_CASE("velocity update examples") {
  PsoConfig c = config_for(PsoVariant::Original, 0);
  Particle p;
  p.position = 1.0;
  p.velocity = 0.5;
  p.local_best_position = 2.0;
  CHECK(update_velocity(p, 3.0, c, 0, 1.0, 1.0) == 6.5);
  c.v_max = 4.0;
  CHECK(update_velocity(p, 3.0, c, 0, 1.0, 1.0) == 4.0);
  p.velocity = -9.0;
  p.local_best_position = p.position;
  CHECK(update_velocity(p, 1.0, c, 0, 1.0, 1.0) == -4.0);

  Particle still;
  still.position = still.local_best_position = 4.0;
  for (auto v : {PsoVariant::Original, PsoVariant::Inertia, PsoVariant::Constriction}) {
    CHECK(update_velocity(still, 4.0, config_for(v, 0), 2, 0.3, 0.8) == 0.0);
  }
}

TEST_CASE("velocity update per variant against direct evaluation") {
  Particle p;
  p.position = 2.0;
  p.velocity = 1.25;
  p.local_best_position = 5.0;
  const double gbest = 7.0, r1 = 0.3, r2 = 0.6;
  const double social = 2.0 * r1 * 3.0 + 2.0 * r2 * 5.0;

  PsoConfig inertia = config_for(PsoVariant::Inertia, 0);
  inertia.n_iterations = 4;
  CHECK(update_velocity(p, gbest, inertia, 2, r1, r2) == doctest::Approx(0.65 * 1.25 + social).epsilon(1e-15));

  PsoConfig constr = config_for(PsoVariant::Constriction, 0);
  const double k = constriction_factor(2.05, 2.05, ConstrictionForm::Standard);
  const double expect = k * (1.25 + 2.05 * r1 * 3.0 + 2.05 * r2 * 5.0);
  CHECK(update_velocity(p, gbest, constr, 0, r1, r2) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("position update clamps and keeps interior moves") {
  CHECK(update_position(1.0, 6.5, 0.0, 10.0) == 7.5);
  CHECK(update_position(9.0, 6.5, 0.0, 10.0) == 10.0);
  CHECK(update_position(1.0, -6.5, 0.0, 10.0) == 0.0);
  CHECK(update_position(3.25, 0.0, 0.0, 10.0) == 3.25);
}

TEST_CASE("config validation reports every violation") {
  PsoConfig c;
  c.n_particles = 0;
  c.variant = PsoVariant::Constriction;
  c.lo = 1.0;
  c.hi = 1.0;
  c.v_max = -1.0;
  const auto v = c.violations();
  CHECK(v.size() >= 4);
  bool phi_message = false;
  for (const auto& s : v) phi_message |= s.find("phi") != std::string::npos && s.find("> 4") != std::string::npos;
  CHECK(phi_message);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(PsoConfig{}.violations().empty());
}

TEST_CASE("maximize the quadratic") {
  PsoConfig c = config_for(PsoVariant::Inertia, 12345);
  c.n_particles = 6;
  c.n_iterations = 50;
  const auto start = std::chrono::steady_clock::now();
  const PsoResult r = maximize(Objective(quadratic), c);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(1));
  CHECK(std::abs(r.best_position - 3.0) < 1e-2);
  CHECK(std::abs(r.best_value) < 1e-3);
  CHECK(r.evaluations == 6 * 51);
  CHECK(r.trace.size() == 6 * 51);
  CHECK(r.best_value == quadratic(r.best_position));
}

TEST_CASE("boundary optimum is reachable") {
  PsoConfig c = config_for(PsoVariant::Inertia, 3, 0.0, 1.0);
  c.n_iterations = 50;
  const PsoResult r = maximize(Objective([](double x) { return x; }), c);
  CHECK(r.best_position >= 0.99);
}

TEST_CASE("constant objective") {
  PsoConfig c = config_for(PsoVariant::Original, 1);
  c.n_iterations = 1;
  const PsoResult r = maximize(Objective([](double) { return 2.5; }), c);
  CHECK(r.best_value == 2.5);
}

TEST_CASE("non-finite objective values never win") {
  PsoConfig c = config_for(PsoVariant::Inertia, 2);
  c.n_iterations = 10;
  const PsoResult r = maximize(Objective([](double x) { return x < 5.0 ? NAN : -x; }), c);
  CHECK(r.best_position >= 5.0);
  CHECK(std::isfinite(r.best_value));
}

TEST_CASE("zero iterations evaluates the initial swarm only") {
  PsoConfig c = config_for(PsoVariant::Inertia, 8);
  c.n_particles = 1;
  c.n_iterations = 0;
  const PsoResult r = maximize(Objective(quadratic), c);
  CHECK(r.evaluations == 1);
  CHECK(r.best_value == quadratic(r.best_position));
}

TEST_CASE("structural invariants over seeds and variants") {
  const auto start = std::chrono::steady_clock::now();
  for (auto variant : {PsoVariant::Original, PsoVariant::Inertia, PsoVariant::Constriction}) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      PsoConfig c = config_for(variant, seed * 7919 + 1, -4.0, 6.0);
      c.n_iterations = 30;
      c.n_particles = 5;
      c.v_max = 1.5;
      auto f = [](double x) { return std::sin(3.0 * x) - 0.1 * x * x; };
      const PsoResult r = maximize(Objective(f), c);
      double prev_best = -INFINITY;
      for (const auto& row : r.trace) {
        REQUIRE(row.position >= c.lo);
        REQUIRE(row.position <= c.hi);
        REQUIRE(std::abs(row.velocity) <= 1.5);
        REQUIRE(row.global_best >= prev_best);
        REQUIRE(row.global_best >= row.objective);
        prev_best = row.global_best;
      }
      CHECK(std::abs(r.best_value - f(r.best_position)) < 1e-12);
      const PsoResult again = maximize(Objective(f), c);
      CHECK(again.best_position == r.best_position);
      REQUIRE(again.trace.size() == r.trace.size());
      for (std::size_t i = 0; i < r.trace.size(); ++i) {
        REQUIRE(again.trace[i].position == r.trace[i].position);
        REQUIRE(again.trace[i].velocity == r.trace[i].velocity);
      }
    }
  }
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
}

TEST_CASE("threaded evaluation gives identical results") {
  PsoConfig c = config_for(PsoVariant::Inertia, 44);
  c.n_iterations = 20;
  c.n_particles = 8;
  const PsoResult serial = maximize(Objective(quadratic), c, 1);
  const PsoResult parallel = maximize(Objective(quadratic), c, 4);
  CHECK(serial.best_position == parallel.best_position);
  CHECK(trace_to_csv(serial.trace) == trace_to_csv(parallel.trace));
}

TEST_CASE("trace CSV layout") {
  PsoConfig c = config_for(PsoVariant::Inertia, 1);
  c.n_particles = 2;
  c.n_iterations = 1;
  const std::string csv = trace_to_csv(maximize(Objective(quadratic), c).trace);
  CHECK(csv.rfind("iteration,particle,position,velocity,objective,global_best\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}
