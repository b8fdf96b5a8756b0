#include "specsched/schedules.hpp"

#include "specsched/io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace specsched {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void require_steps(int steps) { require(steps >= 1, "schedule: steps must be >= 1"); }

/// Affine map of a decreasing raw curve onto [epsS, 1 - eps0].
Schedule pin_endpoints(const VectorXd& raw, Endpoints ends, std::string kind) {
  require(ends.eps0 > 0.0 && ends.epsS > 0.0 && ends.epsS < 1.0 - ends.eps0,
          "schedule: endpoint parameters out of range");
  const Index S = raw.size() - 1;
  const double hi = raw[0];
  const double lo = raw[S];
  require(hi > lo, "schedule: raw curve is not decreasing end to end");
  const double top = 1.0 - ends.eps0;
  Schedule out;
  out.kind = std::move(kind);
  out.eps0 = ends.eps0;
  out.epsS = ends.epsS;
  out.alpha_bar.resize(S + 1);
  for (Index i = 0; i <= S; ++i) {
    out.alpha_bar[i] = ends.epsS + (raw[i] - lo) / (hi - lo) * (top - ends.epsS);
  }
  out.alpha_bar[0] = top;
  out.alpha_bar[S] = ends.epsS;
  return out;
}

std::string kind_with_params(const std::string& family, std::initializer_list<double> params) {
  std::ostringstream os;
  os << family << '(';
  bool first = true;
  for (double p : params) {
    if (!first) os << ',';
    os << io::format_double(p);
    first = false;
  }
  os << ')';
  return os.str();
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_cosine_params(double s, double e, double tau) {
  require(s >= 0.0 && s < e && e <= 1.0, "cosine schedule: requires 0 <= s < e <= 1");
  require(tau > 0.0 && std::isfinite(tau), "cosine schedule: tau must be positive");
}

void check_sigmoid_params(double s, double e, double tau) {
  require(s < e && std::isfinite(s) && std::isfinite(e), "sigmoid schedule: requires s < e");
  require(tau > 0.0 && std::isfinite(tau), "sigmoid schedule: tau must be positive");
}

// Normalized raw curve in [0, 1] with n(0) = 1, n(1) = 0.
double normalized_curve(ParametricFamily family, double t, double s, double e, double tau) {
  const auto f = family == ParametricFamily::cosine ? cosine_curve : sigmoid_curve;
  const double f0 = f(0.0, s, e, tau);
  const double f1 = f(1.0, s, e, tau);
  return (f(t, s, e, tau) - f1) / (f0 - f1);
}

}  // namespace

double cosine_curve(double t, double start, double end, double tau) {
  const double c = std::cos((t * (end - start) + start) * std::numbers::pi / 2.0);
  return std::pow(std::max(c, 0.0), 2.0 * tau);
}

double sigmoid_curve(double t, double start, double end, double tau) {
  return logistic(-(t * (end - start) + start) / tau);
}

double edm_sigma(int i, int steps, double rho, double sigma_min, double sigma_max) {
  const double hi = std::pow(sigma_max, 1.0 / rho);
  const double lo = std::pow(sigma_min, 1.0 / rho);
  return std::pow(hi + (static_cast<double>(i) / steps) * (lo - hi), rho);
}

Schedule linear_schedule(int steps, Endpoints ends) {
  require_steps(steps);
  constexpr int kTrainSteps = 1000;
  constexpr double kBetaMin = 1e-4;
  constexpr double kBetaMax = 0.02;
  // cum[k] = sum_{j <= k} log(1 - beta_j) over the 1000-step training grid.
  std::array<double, kTrainSteps + 1> cum{};
  for (int k = 1; k <= kTrainSteps; ++k) {
    const double beta = kBetaMin + (kBetaMax - kBetaMin) * (k - 1) / (kTrainSteps - 1);
    cum[k] = cum[k - 1] + std::log1p(-beta);
  }
  VectorXd raw(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) * kTrainSteps / steps;
    const int k = std::min(static_cast<int>(std::floor(t)), kTrainSteps - 1);
    const double frac = t - k;
    raw[i] = std::exp(cum[k] + frac * (cum[k + 1] - cum[k]));
  }
  return pin_endpoints(raw, ends, "linear");
}

Schedule cosine_schedule(int steps, double start, double end, double tau, Endpoints ends) {
  require_steps(steps);
  check_cosine_params(start, end, tau);
  VectorXd raw(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    raw[i] = normalized_curve(ParametricFamily::cosine, static_cast<double>(i) / steps, start,
                              end, tau);
  }
  return pin_endpoints(raw, ends, kind_with_params("cosine", {start, end, tau}));
}

Schedule sigmoid_schedule(int steps, double start, double end, double tau, Endpoints ends) {
  require_steps(steps);
  check_sigmoid_params(start, end, tau);
  VectorXd raw(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    raw[i] = normalized_curve(ParametricFamily::sigmoid, static_cast<double>(i) / steps, start,
                              end, tau);
  }
  return pin_endpoints(raw, ends, kind_with_params("sigmoid", {start, end, tau}));
}

Schedule edm_schedule(int steps, double rho, double sigma_min, double sigma_max,
                      Endpoints ends) {
  require_steps(steps);
  require(rho >= 1.0 && std::isfinite(rho), "edm schedule: rho must be >= 1");
  require(sigma_min > 0.0 && sigma_min < sigma_max && std::isfinite(sigma_max),
          "edm schedule: requires 0 < sigma_min < sigma_max");
  VectorXd raw(steps + 1);
  // EDM index i = 0 is the noisiest level; alpha_bar index j = S - i.
  for (int j = 0; j <= steps; ++j) {
    raw[j] = sigma_to_alpha_bar(edm_sigma(steps - j, steps, rho, sigma_min, sigma_max));
  }
  return pin_endpoints(raw, ends, kind_with_params("edm", {rho, sigma_min, sigma_max}));
}

Schedule uniform_decrease_schedule(int steps, Endpoints ends) {
  require_steps(steps);
  VectorXd raw(steps + 1);
  for (int i = 0; i <= steps; ++i) raw[i] = 1.0 - static_cast<double>(i) / steps;
  return pin_endpoints(raw, ends, "uniform");
}

Schedule warm_start_interpolate(const Schedule& schedule, int new_steps) {
  require(new_steps >= 1, "warm_start_interpolate: new step count must be >= 1");
  schedule.validate_box();
  const int S = schedule.steps();
  Schedule out;
  out.kind = schedule.kind;
  out.eps0 = schedule.eps0;
  out.epsS = schedule.epsS;
  out.alpha_bar.resize(new_steps + 1);
  for (int j = 0; j <= new_steps; ++j) {
    const double x = static_cast<double>(j) * S / new_steps;
    const int k = std::min(static_cast<int>(std::floor(x)), S - 1);
    const double f = x - k;
    out.alpha_bar[j] = f == 0.0 ? schedule.alpha_bar[k]
                                : (1.0 - f) * schedule.alpha_bar[k] + f * schedule.alpha_bar[k + 1];
  }
  out.alpha_bar[0] = 1.0 - schedule.eps0;
  out.alpha_bar[new_steps] = schedule.epsS;
  return out;
}

namespace {

using Params = std::array<double, 3>;

double fit_objective(const Schedule& target, ParametricFamily family, const Params& q) {
  const double s = q[0], e = q[1], tau = q[2];
  if (!(tau > 1e-3) || !(tau < 50.0) || !(s < e)) return HUGE_VAL;
  if (family == ParametricFamily::cosine && (s < 0.0 || e > 1.0)) return HUGE_VAL;
  if (family == ParametricFamily::sigmoid && (std::abs(s) > 50.0 || std::abs(e) > 50.0)) {
    return HUGE_VAL;
  }
  const int S = target.steps();
  const double span = 1.0 - target.eps0 - target.epsS;
  double sum = 0.0;
  for (int i = 0; i <= S; ++i) {
    const double n = normalized_curve(family, static_cast<double>(i) / S, s, e, tau);
    const double r = target.epsS + n * span - target.alpha_bar[i];
    sum += r * r;
  }
  return std::isfinite(sum) ? sum : HUGE_VAL;
}

/// Nelder-Mead on three parameters with standard coefficients.
std::pair<Params, double> nelder_mead(const Schedule& target, ParametricFamily family,
                                      Params x0, Params scale) {
  std::array<Params, 4> simplex{};
  std::array<double, 4> f{};
  simplex[0] = x0;
  for (int k = 0; k < 3; ++k) {
    simplex[k + 1] = x0;
    simplex[k + 1][k] += scale[k];
  }
  for (int k = 0; k < 4; ++k) f[k] = fit_objective(target, family, simplex[k]);

  auto combine = [](const Params& a, const Params& b, double t) {
    Params r{};
    for (int k = 0; k < 3; ++k) r[k] = a[k] + t * (b[k] - a[k]);
    return r;
  };

  for (int iter = 0; iter < 4000; ++iter) {
    std::array<int, 4> order{0, 1, 2, 3};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return f[a] < f[b]; });
    const int best = order[0], worst = order[3], second = order[2];
    if (std::abs(f[worst] - f[best]) <= 1e-18 + 1e-14 * std::abs(f[best])) {
      double extent = 0.0;
      for (int k = 0; k < 3; ++k) {
        extent = std::max(extent, std::abs(simplex[worst][k] - simplex[best][k]));
      }
      if (extent < 1e-10) break;
    }
    Params centroid{};
    for (int v : {order[0], order[1], order[2]}) {
      for (int k = 0; k < 3; ++k) centroid[k] += simplex[v][k] / 3.0;
    }
    const Params reflected = combine(centroid, simplex[worst], -1.0);
    const double fr = fit_objective(target, family, reflected);
    if (fr < f[best]) {
      const Params expanded = combine(centroid, simplex[worst], -2.0);
      const double fe = fit_objective(target, family, expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        f[worst] = fe;
      } else {
        simplex[worst] = reflected;
        f[worst] = fr;
      }
      continue;
    }
    if (fr < f[second]) {
      simplex[worst] = reflected;
      f[worst] = fr;
      continue;
    }
    const Params contracted = fr < f[worst] ? combine(centroid, reflected, 0.5)
                                            : combine(centroid, simplex[worst], 0.5);
    const double fc = fit_objective(target, family, contracted);
    if (fc < std::min(fr, f[worst])) {
      simplex[worst] = contracted;
      f[worst] = fc;
      continue;
    }
    for (int v : {order[1], order[2], order[3]}) {
      simplex[v] = combine(simplex[best], simplex[v], 0.5);
      f[v] = fit_objective(target, family, simplex[v]);
    }
  }
  const auto it = std::min_element(f.begin(), f.end());
  return {simplex[static_cast<size_t>(it - f.begin())], *it};
}

}  // namespace

ParametricFit fit_parametric(const Schedule& schedule, ParametricFamily family) {
  schedule.validate_box();
  std::vector<double> starts, ends, taus;
  if (family == ParametricFamily::cosine) {
    starts = {0.0, 0.1, 0.2, 0.3, 0.4};
    ends = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    taus = {0.25, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0};
  } else {
    starts = {-6.0, -5.0, -4.0, -3.0, -2.0, -1.0, 0.0};
    ends = {1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    taus = {0.3, 0.5, 0.7, 1.0, 1.5, 2.0};
  }
  std::vector<std::pair<double, Params>> grid;
  for (double s : starts) {
    for (double e : ends) {
      for (double tau : taus) {
        const Params q{s, e, tau};
        const double f = fit_objective(schedule, family, q);
        if (std::isfinite(f)) grid.emplace_back(f, q);
      }
    }
  }
  std::sort(grid.begin(), grid.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  Params best = grid.front().second;
  double best_f = grid.front().first;
  const Params scale = family == ParametricFamily::cosine ? Params{0.05, 0.05, 0.1}
                                                          : Params{0.5, 0.5, 0.1};
  const size_t refinements = std::min<size_t>(3, grid.size());
  for (size_t r = 0; r < refinements; ++r) {
    auto [q, f] = nelder_mead(schedule, family, grid[r].second, scale);
    // A restart from the converged point shakes off a collapsed simplex.
    auto [q2, f2] = nelder_mead(schedule, family, q, {scale[0] * 0.1, scale[1] * 0.1, scale[2] * 0.1});
    if (f2 < f) {
      q = q2;
      f = f2;
    }
    if (f < best_f) {
      best = q;
      best_f = f;
    }
  }
  return {best[0], best[1], best[2], std::sqrt(best_f)};
}

Schedule make_schedule(const std::string& family, int steps, const std::vector<double>& params,
                       Endpoints ends) {
  auto param = [&](size_t i, double fallback) { return params.empty() ? fallback : params.at(i); };
  auto need = [&](size_t n) {
    if (!params.empty() && params.size() != n) {
      throw ValidationError("schedule family '" + family + "' expects " + std::to_string(n) +
                            " parameters");
    }
  };
  if (family == "linear") {
    need(0);
    return linear_schedule(steps, ends);
  }
  if (family == "uniform") {
    need(0);
    return uniform_decrease_schedule(steps, ends);
  }
  if (family == "cosine") {
    need(3);
    return cosine_schedule(steps, param(0, 0.0), param(1, 1.0), param(2, 1.0), ends);
  }
  if (family == "sigmoid") {
    need(3);
    return sigmoid_schedule(steps, param(0, -3.0), param(1, 3.0), param(2, 1.0), ends);
  }
  if (family == "edm") {
    need(3);
    return edm_schedule(steps, param(0, 7.0), param(1, 0.002), param(2, 80.0), ends);
  }
  throw ValidationError("unknown schedule family '" + family + "'");
}

}  // namespace specsched
