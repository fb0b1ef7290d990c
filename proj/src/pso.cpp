#include "pdeep/pso.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "pdeep/random.hpp"
#include "text_io.hpp"

namespace pdeep {

std::string to_string(PsoVariant v) {
  switch (v) {
    case PsoVariant::Original: return "original";
    case PsoVariant::Inertia: return "inertia";
    case PsoVariant::Constriction: return "constriction";
  }
  return "unknown";
}

std::optional<PsoVariant> parse_pso_variant(std::string_view s) {
  if (s == "original") return PsoVariant::Original;
  if (s == "inertia") return PsoVariant::Inertia;
  if (s == "constriction") return PsoVariant::Constriction;
  return std::nullopt;
}

std::string to_string(ConstrictionForm f) { return f == ConstrictionForm::AsPrinted ? "as_printed" : "standard"; }

std::optional<ConstrictionForm> parse_constriction_form(std::string_view s) {
  if (s == "as_printed") return ConstrictionForm::AsPrinted;
  if (s == "standard") return ConstrictionForm::Standard;
  return std::nullopt;
}

std::vector<std::string> PsoConfig::violations() const {
  std::vector<std::string> out;
  if (n_particles == 0) out.emplace_back("n_particles must be >= 1");
  if (!(theta1 > 0.0) || !std::isfinite(theta1)) out.emplace_back("theta1 must be positive");
  if (!(theta2 > 0.0) || !std::isfinite(theta2)) out.emplace_back("theta2 must be positive");
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) out.emplace_back("bounds need finite lo < hi");
  if (!(w_max >= w_min)) out.emplace_back("w_max must be >= w_min");
  if (v_max && !(*v_max > 0.0)) out.emplace_back("v_max must be positive when set");
  if (variant == PsoVariant::Constriction && !(theta1 + theta2 > 4.0)) {
    out.emplace_back("constriction variant requires phi = theta1 + theta2 > 4, got " +
                     detail::format_double(theta1 + theta2));
  }
  return out;
}

void PsoConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid PSO configuration:";
  for (const auto& s : v) msg += " " + s + ";";
  throw std::invalid_argument(msg);
}

double inertia_at(std::size_t i, std::size_t i_max, double w_max, double w_min) {
  if (i_max == 0) throw std::invalid_argument("i_max must be >= 1");
  if (i > i_max) throw std::invalid_argument("iteration index exceeds i_max");
  if (!(w_max >= w_min)) throw std::invalid_argument("w_max must be >= w_min");
  return w_max - (static_cast<double>(i) / static_cast<double>(i_max)) * (w_max - w_min);
}

double constriction_factor(double theta1, double theta2, ConstrictionForm form) {
  const double phi = theta1 + theta2;
  if (!(phi > 4.0)) throw std::invalid_argument("constriction factor requires phi = theta1 + theta2 > 4");
  const double base = form == ConstrictionForm::AsPrinted ? 4.0 : 2.0;
  return 2.0 / std::abs(base - phi - std::sqrt(phi * phi - 4.0 * phi));
}

double update_velocity(const Particle& p, double global_best_position, const PsoConfig& config,
                       std::size_t iteration, double r1, double r2) {
  double carried = p.velocity;
  if (config.variant == PsoVariant::Inertia) {
    const std::size_t i_max = std::max<std::size_t>(config.n_iterations, 1);
    carried *= inertia_at(std::min(iteration, i_max), i_max, config.w_max, config.w_min);
  }
  double v = carried + config.theta1 * r1 * (p.local_best_position - p.position) +
             config.theta2 * r2 * (global_best_position - p.position);
  if (config.variant == PsoVariant::Constriction) {
    v *= constriction_factor(config.theta1, config.theta2, config.constriction_form);
  }
  if (config.v_max) v = std::clamp(v, -*config.v_max, *config.v_max);
  return v;
}

double update_position(double x, double v_next, double lo, double hi) {
  return std::clamp(x + v_next, lo, hi);
}

namespace {

double sanitize(double v) { return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity(); }

void merge_bests(Swarm& swarm, std::span<const double> values) {
  for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
    Particle& p = swarm.particles[i];
    if (values[i] > p.local_best_value) {
      p.local_best_value = values[i];
      p.local_best_position = p.position;
    }
    if (values[i] > swarm.global_best_value) {
      swarm.global_best_value = values[i];
      swarm.global_best_position = p.position;
    }
  }
}

std::vector<double> evaluate(const BatchObjective& objective, const Swarm& swarm) {
  std::vector<double> positions;
  positions.reserve(swarm.particles.size());
  for (const auto& p : swarm.particles) positions.push_back(p.position);
  std::vector<double> values = objective(positions);
  if (values.size() != positions.size()) throw std::logic_error("batch objective returned the wrong count");
  for (double& v : values) v = sanitize(v);
  return values;
}

void record(std::vector<PsoTraceRow>& trace, const Swarm& swarm, std::span<const double> values) {
  for (std::size_t i = 0; i < swarm.particles.size(); ++i) {
    const Particle& p = swarm.particles[i];
    trace.push_back({swarm.iteration, i, p.position, p.velocity, values[i], swarm.global_best_value});
  }
}

}  // namespace

PsoResult maximize(const BatchObjective& objective, const PsoConfig& config) {
  config.validate();
  Rng rng(config.rng_seed);
  Swarm swarm;
  swarm.iteration_limit = config.n_iterations;
  swarm.particles.resize(config.n_particles);
  for (auto& p : swarm.particles) {
    p.position = rng.uniform(config.lo, config.hi);
    p.local_best_position = p.position;
  }
  swarm.global_best_position = swarm.particles.front().position;

  PsoResult result;
  std::vector<double> values = evaluate(objective, swarm);
  result.evaluations += values.size();
  merge_bests(swarm, values);
  record(result.trace, swarm, values);

  for (std::size_t it = 0; it < config.n_iterations; ++it) {
    const double gbest = swarm.global_best_position;
    for (auto& p : swarm.particles) {
      const double r1 = rng.uniform01_closed();
      const double r2 = rng.uniform01_closed();
      p.velocity = update_velocity(p, gbest, config, it, r1, r2);
      p.position = update_position(p.position, p.velocity, config.lo, config.hi);
    }
    swarm.iteration = it + 1;
    values = evaluate(objective, swarm);
    result.evaluations += values.size();
    merge_bests(swarm, values);
    record(result.trace, swarm, values);
  }

  result.best_position = swarm.global_best_position;
  result.best_value = swarm.global_best_value;
  result.final_swarm = std::move(swarm);
  return result;
}

PsoResult maximize(const Objective& objective, const PsoConfig& config, std::size_t threads) {
  BatchObjective batch = [&objective, threads](std::span<const double> xs) {
    std::vector<double> out(xs.size());
    const std::size_t workers = std::clamp<std::size_t>(threads, 1, xs.size());
    if (workers <= 1) {
      for (std::size_t i = 0; i < xs.size(); ++i) out[i] = objective(xs[i]);
      return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < xs.size(); i = next++) {
          try {
            out[i] = objective(xs[i]);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
  };
  return maximize(batch, config);
}

std::string trace_to_csv(std::span<const PsoTraceRow> trace) {
  using detail::format_double;
  std::ostringstream out;
  out << "iteration,particle,position,velocity,objective,global_best\n";
  for (const auto& r : trace) {
    out << r.iteration << ',' << r.particle << ',' << format_double(r.position) << ',' << format_double(r.velocity)
        << ',' << format_double(r.objective) << ',' << format_double(r.global_best) << '\n';
  }
  return out.str();
}

}  // namespace pdeep
