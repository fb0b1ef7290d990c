#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pdeep {

enum class PsoVariant { Original, Inertia, Constriction };

// Which constriction coefficient to use. AsPrinted evaluates
// 2 / |4 - phi - sqrt(phi^2 - 4 phi)|; Standard is Clerc's
// 2 / |2 - phi - sqrt(phi^2 - 4 phi)|.
enum class ConstrictionForm { AsPrinted, Standard };

std::string to_string(PsoVariant v);
std::optional<PsoVariant> parse_pso_variant(std::string_view s);
std::string to_string(ConstrictionForm f);
std::optional<ConstrictionForm> parse_constriction_form(std::string_view s);

/// One-dimensional bounded swarm configuration.
struct PsoConfig {
  std::size_t n_particles = 6;
  // Zero means: evaluate the initial positions only.
  std::size_t n_iterations = 4;
  double theta1 = 2.0;  // pull towards the particle's own best
  double theta2 = 2.0;  // pull towards the swarm best
  PsoVariant variant = PsoVariant::Inertia;
  double w_max = 0.9;
  double w_min = 0.4;
  std::optional<double> v_max;
  ConstrictionForm constriction_form = ConstrictionForm::AsPrinted;
  double lo = 0.0;
  double hi = 1.0;
  std::uint64_t rng_seed = 0;

  // Every violated invariant, empty when valid.
  std::vector<std::string> violations() const;
  // Throws std::invalid_argument joining all violations.
  void validate() const;
};

struct Particle {
  double position = 0.0;
  double velocity = 0.0;
  double local_best_position = 0.0;
  double local_best_value = -std::numeric_limits<double>::infinity();
};

struct Swarm {
  std::vector<Particle> particles;
  double global_best_position = 0.0;
  double global_best_value = -std::numeric_limits<double>::infinity();
  std::size_t iteration = 0;
  std::size_t iteration_limit = 0;
};

// Iteration 0 holds the initial evaluations.
struct PsoTraceRow {
  std::size_t iteration = 0;
  std::size_t particle = 0;
  double position = 0.0;
  double velocity = 0.0;
  double objective = 0.0;
  double global_best = 0.0;
};

struct PsoResult {
  double best_position = 0.0;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<PsoTraceRow> trace;
  std::size_t evaluations = 0;
  Swarm final_swarm;
};

double inertia_at(std::size_t i, std::size_t i_max, double w_max, double w_min);

double constriction_factor(double theta1, double theta2, ConstrictionForm form = ConstrictionForm::AsPrinted);

// Velocity for the next step of `p`. `iteration` is the number of completed
// iterations (drives the inertia schedule); r1, r2 are the random draws.
double update_velocity(const Particle& p, double global_best_position, const PsoConfig& config,
                       std::size_t iteration, double r1, double r2);

// x + v projected onto [lo, hi].
double update_position(double x, double v_next, double lo, double hi);

using Objective = std::function<double(double)>;
// Evaluates a whole iteration's positions; must return one value per input.
using BatchObjective = std::function<std::vector<double>(std::span<const double>)>;

// Maximizes over [lo, hi]. Non-finite objective values count as -infinity.
// Bests are merged in particle-index order after each iteration's
// evaluations, so results do not depend on evaluation scheduling.
PsoResult maximize(const BatchObjective& objective, const PsoConfig& config);

// Scalar objective; up to `threads` evaluations run concurrently.
PsoResult maximize(const Objective& objective, const PsoConfig& config, std::size_t threads = 1);

std::string trace_to_csv(std::span<const PsoTraceRow> trace);

}  // namespace pdeep
