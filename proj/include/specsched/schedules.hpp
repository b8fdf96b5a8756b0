// Heuristic baseline schedules and schedule utilities.
//
// Every generator produces a raw decreasing curve r(t) on t = i / S and maps
// it affinely onto [epsS, 1 - eps0], so r(0) -> 1 - eps0 and r(1) -> epsS
// exactly. The interior shape is preserved.

#pragma once

#include "specsched/core.hpp"

#include <string>
#include <vector>

namespace specsched {

struct Endpoints {
  double eps0 = kDefaultEps0;
  double epsS = kDefaultEpsS;
};

/// DDPM linear-beta schedule (beta in [1e-4, 0.02] over 1000 training steps)
/// sampled at t = 1000 i / S, then endpoint-mapped.
Schedule linear_schedule(int steps, Endpoints ends = {});

/// f(t) = cos((t (e - s) + s) pi / 2)^(2 tau), normalized to [0, 1].
Schedule cosine_schedule(int steps, double start, double end, double tau, Endpoints ends = {});

/// g(t) = logistic(-(t (e - s) + s) / tau), normalized to [0, 1].
Schedule sigmoid_schedule(int steps, double start, double end, double tau, Endpoints ends = {});

/// Karras et al. sigma ramp converted with alpha_bar = 1 / (1 + sigma^2).
Schedule edm_schedule(int steps, double rho = 7.0, double sigma_min = 0.002,
                      double sigma_max = 80.0, Endpoints ends = {});

/// Linearly decreasing alpha_bar from 1 - eps0 to epsS.
Schedule uniform_decrease_schedule(int steps, Endpoints ends = {});

/// Raw (pre-normalization) curve values, exposed for tests and fitting.
double cosine_curve(double t, double start, double end, double tau);
double sigmoid_curve(double t, double start, double end, double tau);
double edm_sigma(int i, int steps, double rho, double sigma_min, double sigma_max);

/// Piecewise-linear resampling of alpha_bar over normalized time. Endpoints
/// are re-pinned to the source schedule's eps0 / epsS.
Schedule warm_start_interpolate(const Schedule& schedule, int new_steps);

enum class ParametricFamily { cosine, sigmoid };

struct ParametricFit {
  double start = 0.0;
  double end = 0.0;
  double tau = 0.0;
  /// L2 norm of the difference over all S + 1 points.
  double residual = 0.0;
};

/// Least-squares fit of (s, e, tau): coarse grid search followed by
/// Nelder-Mead refinement from the best few grid points.
ParametricFit fit_parametric(const Schedule& schedule, ParametricFamily family);

/// Build a schedule from a family spec such as "cosine", params {0, 1, 1}.
Schedule make_schedule(const std::string& family, int steps, const std::vector<double>& params,
                       Endpoints ends = {});

}  // namespace specsched
