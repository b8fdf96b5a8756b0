// Noise-schedule optimization: minimize loss(transfer(alpha_bar)) over the
// interior entries alpha_bar_1 .. alpha_bar_{S-1} with the endpoints fixed,
// subject to alpha_bar being non-increasing (constrained mode) or only to the
// box (epsS, 1 - eps0) (free mode).

#pragma once

#include "specsched/core.hpp"
#include "specsched/losses.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace specsched {

enum class OptimizeMode { constrained, free };

std::string to_string(OptimizeMode mode);
OptimizeMode parse_optimize_mode(const std::string& s);

enum class InitKind { linear, cosine, uniform_random, warm_start };

struct InitSpec {
  InitKind kind = InitKind::linear;
  std::uint64_t seed = 0;            // uniform_random only
  std::optional<Schedule> previous;  // warm_start only: solution at another S

  static InitSpec linear() { return {}; }
  static InitSpec cosine() { return {InitKind::cosine, 0, std::nullopt}; }
  static InitSpec uniform_random(std::uint64_t seed) {
    return {InitKind::uniform_random, seed, std::nullopt};
  }
  static InitSpec warm_start(Schedule previous) {
    return {InitKind::warm_start, 0, std::move(previous)};
  }
};

std::string to_string(const InitSpec& init);

struct OptimizeConfig {
  LossKind loss = LossKind::wasserstein2;
  Process process = Process::ddim;
  int steps = 10;
  double eps0 = kDefaultEps0;
  double epsS = kDefaultEpsS;
  OptimizeMode mode = OptimizeMode::constrained;
  InitSpec init;
  int max_iter = 2000;
  double ftol = 1e-6;
  double gtol = 1e-8;
  std::optional<Index> single_eigenvalue_index;

  void validate() const;
};

struct OptimizeReport {
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  int objective_evals = 0;
  /// Loss after each accepted iterate, starting with the initial schedule.
  std::vector<double> loss_trace;
  bool converged = false;
  /// Why the run stopped: "ftol", "gtol", "no-descent" or "max_iter".
  std::string stop_reason;
  double wall_time_seconds = 0.0;
};

struct OptimizeResult {
  Schedule schedule;
  OptimizeReport report;
};

/// Minimum gap kept between consecutive entries after projection.
inline constexpr double kMinSpacing = 1e-10;

OptimizeResult optimize_schedule(const SpectralModel& model, const OptimizeConfig& config);

/// Initial schedule for a configuration, already made feasible.
Schedule initial_schedule(const OptimizeConfig& config);

/// Euclidean projection onto { x : x_1 >= x_2 >= ... >= x_n, lower <= x_i <= upper }
/// by pool-adjacent-violators followed by clipping.
VectorXd isotonic_project(const VectorXd& values, double lower, double upper);

/// Copy of the model keeping only eigenvalue i; the mean is zeroed.
SpectralModel single_eigenvalue_problem(const SpectralModel& model, Index i);

}  // namespace specsched
