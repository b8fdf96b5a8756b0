#include "specsched/optimize.hpp"

#include "objective.hpp"
#include "specsched/rng.hpp"
#include "specsched/schedules.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <limits>

namespace specsched {

std::string to_string(OptimizeMode mode) {
  return mode == OptimizeMode::constrained ? "constrained" : "free";
}

OptimizeMode parse_optimize_mode(const std::string& s) {
  if (s == "constrained") return OptimizeMode::constrained;
  if (s == "free") return OptimizeMode::free;
  throw ValidationError("unknown mode '" + s + "' (expected constrained or free)");
}

std::string to_string(const InitSpec& init) {
  switch (init.kind) {
    case InitKind::linear: return "linear";
    case InitKind::cosine: return "cosine";
    case InitKind::uniform_random: return "uniform-random(" + std::to_string(init.seed) + ")";
    case InitKind::warm_start:
      return "warm-start(" + std::to_string(init.previous ? init.previous->steps() : 0) + ")";
  }
  return "?";
}

void OptimizeConfig::validate() const {
  if (steps < 2) throw ValidationError("optimize: steps must be at least 2");
  if (!(eps0 > 0.0 && epsS > 0.0 && epsS < 1.0 - eps0)) {
    throw ValidationError("optimize: endpoint parameters out of range");
  }
  if (!(ftol > 0.0) || !(gtol > 0.0)) throw ValidationError("optimize: tolerances must be positive");
  if (max_iter < 0) throw ValidationError("optimize: max_iter must be nonnegative");
  if (init.kind == InitKind::warm_start && !init.previous) {
    throw ValidationError("optimize: warm start requires a previous schedule");
  }
}

VectorXd isotonic_project(const VectorXd& values, double lower, double upper) {
  if (!(lower < upper)) throw ValidationError("isotonic_project: lower must be below upper");
  // Pool adjacent violators for a non-increasing fit: blocks with means that
  // must decrease from left to right.
  std::vector<double> sum;
  std::vector<Index> count;
  for (Index i = 0; i < values.size(); ++i) {
    sum.push_back(values[i]);
    count.push_back(1);
    while (sum.size() > 1) {
      const size_t k = sum.size() - 1;
      if (sum[k - 1] / count[k - 1] >= sum[k] / count[k]) break;
      sum[k - 1] += sum[k];
      count[k - 1] += count[k];
      sum.pop_back();
      count.pop_back();
    }
  }
  VectorXd out(values.size());
  Index pos = 0;
  for (size_t b = 0; b < sum.size(); ++b) {
    const double v = std::clamp(sum[b] / count[b], lower, upper);
    for (Index j = 0; j < count[b]; ++j) out[pos++] = v;
  }
  return out;
}

SpectralModel single_eigenvalue_problem(const SpectralModel& model, Index i) {
  model.validate();
  if (i < 0 || i >= model.dim()) throw ValidationError("single_eigenvalue_problem: index out of range");
  SpectralModel out;
  out.eigenvalues = VectorXd::Zero(model.dim());
  out.eigenvalues[i] = model.eigenvalues[i];
  out.mean_spectral = VectorXd::Zero(model.dim());
  out.source = model.source + "[eigenvalue " + std::to_string(i) + "]";
  return out;
}

namespace {

double logit(double p) { return std::log(p) - std::log1p(-p); }
double expit(double u) { return u >= 0.0 ? 1.0 / (1.0 + std::exp(-u)) : std::exp(u) / (1.0 + std::exp(u)); }

// Feasibility restoration on the interior entries (in alpha_bar space).
class Projector {
 public:
  Projector(const OptimizeConfig& config)
      : mode_(config.mode), top_(1.0 - config.eps0), bottom_(config.epsS) {}

  VectorXd operator()(VectorXd x) const {
    const double lo = bottom_ + kMinSpacing;
    const double hi = top_ - kMinSpacing;
    if (mode_ == OptimizeMode::free) {
      for (Index i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo, hi);
      return x;
    }
    x = isotonic_project(x, lo, hi);
    // Keep strict gaps of kMinSpacing against both endpoints and neighbours.
    double prev = top_;
    for (Index i = 0; i < x.size(); ++i) {
      x[i] = std::min(x[i], prev - kMinSpacing);
      prev = x[i];
    }
    double next = bottom_;
    for (Index i = x.size() - 1; i >= 0; --i) {
      x[i] = std::max(x[i], next + kMinSpacing);
      next = x[i];
    }
    return x;
  }

 private:
  OptimizeMode mode_;
  double top_;
  double bottom_;
};

// Objective over the logits u of the interior entries.
class LogitObjective {
 public:
  LogitObjective(const SpectralModel& model, const OptimizeConfig& config)
      : model_(model), config_(config), full_(config.steps + 1) {
    full_[0] = 1.0 - config.eps0;
    full_[config.steps] = config.epsS;
  }

  double value_and_gradient(const VectorXd& x, VectorXd& grad_u) {
    ++evals_;
    full_.segment(1, x.size()) = x;
    VectorXd g_full;
    const double f = detail::raw_loss_and_gradient(model_, full_, config_.loss, config_.process, g_full);
    // d alpha / d u = alpha (1 - alpha)
    grad_u = g_full.segment(1, x.size()).cwiseProduct(x.cwiseProduct((1.0 - x.array()).matrix()));
    return f;
  }

  int evals() const { return evals_; }

 private:
  const SpectralModel& model_;
  const OptimizeConfig& config_;
  VectorXd full_;
  int evals_ = 0;
};

VectorXd to_logits(const VectorXd& x) { return x.unaryExpr([](double v) { return logit(v); }); }
VectorXd from_logits(const VectorXd& u) { return u.unaryExpr([](double v) { return expit(v); }); }

class Lbfgs {
 public:
  explicit Lbfgs(size_t memory) : memory_(memory) {}

  void clear() {
    s_.clear();
    y_.clear();
  }
  bool empty() const { return s_.empty(); }

  void update(const VectorXd& s, const VectorXd& y) {
    const double sy = s.dot(y);
    if (!(sy > 1e-12 * s.norm() * y.norm())) return;  // keep H positive definite
    s_.push_back(s);
    y_.push_back(y);
    if (s_.size() > memory_) {
      s_.pop_front();
      y_.pop_front();
    }
  }

  VectorXd direction(const VectorXd& g) const {
    VectorXd q = -g;
    const size_t m = s_.size();
    std::vector<double> alpha(m), rho(m);
    for (size_t k = m; k-- > 0;) {
      rho[k] = 1.0 / s_[k].dot(y_[k]);
      alpha[k] = rho[k] * s_[k].dot(q);
      q -= alpha[k] * y_[k];
    }
    const double gamma = s_.back().dot(y_.back()) / y_.back().squaredNorm();
    q *= gamma;
    for (size_t k = 0; k < m; ++k) {
      const double beta = rho[k] * y_[k].dot(q);
      q += (alpha[k] - beta) * s_[k];
    }
    return q;
  }

 private:
  size_t memory_;
  std::deque<VectorXd> s_;
  std::deque<VectorXd> y_;
};

}  // namespace

Schedule initial_schedule(const OptimizeConfig& config) {
  config.validate();
  const Endpoints ends{config.eps0, config.epsS};
  Schedule init;
  switch (config.init.kind) {
    case InitKind::linear: init = uniform_decrease_schedule(config.steps, ends); break;
    case InitKind::cosine: init = cosine_schedule(config.steps, 0.0, 1.0, 1.0, ends); break;
    case InitKind::uniform_random: {
      init = uniform_decrease_schedule(config.steps, ends);
      CounterRng rng(config.init.seed, 0);
      std::vector<double> draws;
      for (int s = 1; s < config.steps; ++s) {
        draws.push_back(config.epsS + (1.0 - config.eps0 - config.epsS) * rng.uniform());
      }
      std::sort(draws.begin(), draws.end(), std::greater<>());
      for (int s = 1; s < config.steps; ++s) init.alpha_bar[s] = draws[s - 1];
      break;
    }
    case InitKind::warm_start: {
      init = warm_start_interpolate(*config.init.previous, config.steps);
      init.alpha_bar[0] = 1.0 - config.eps0;
      init.alpha_bar[config.steps] = config.epsS;
      init.eps0 = config.eps0;
      init.epsS = config.epsS;
      break;
    }
  }
  const Projector project(config);
  init.alpha_bar.segment(1, config.steps - 1) =
      project(init.alpha_bar.segment(1, config.steps - 1));
  init.kind = "init:" + to_string(config.init);
  return init;
}

OptimizeResult optimize_schedule(const SpectralModel& input_model, const OptimizeConfig& config) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  input_model.validate();
  const SpectralModel model = config.single_eigenvalue_index
                                  ? single_eigenvalue_problem(input_model, *config.single_eigenvalue_index)
                                  : input_model;
  if (model.eigenvalues.maxCoeff() <= 0.0 && model.mean_spectral.isZero(0.0)) {
    throw ValidationError("optimize: degenerate model (all eigenvalues and the mean are zero)");
  }

  const int n = config.steps - 1;
  const Projector project(config);
  LogitObjective objective(model, config);

  Schedule init = initial_schedule(config);
  VectorXd x = init.alpha_bar.segment(1, n);
  VectorXd g;
  double f = objective.value_and_gradient(x, g);
  if (!std::isfinite(f)) throw NumericalError("optimize: objective is not finite at the initial schedule");

  OptimizeReport report;
  report.initial_loss = f;
  report.loss_trace.push_back(f);

  // Projected-gradient stationarity measure in logit coordinates.
  auto stationarity = [&](const VectorXd& xs, const VectorXd& gs) {
    const VectorXd moved = project(from_logits(to_logits(xs) - gs));
    return (to_logits(moved) - to_logits(xs)).lpNorm<Eigen::Infinity>();
  };

  Lbfgs memory(20);
  constexpr double kArmijo = 1e-4;
  int iter = 0;
  report.stop_reason = "max_iter";
  while (true) {
    if (n == 0 || stationarity(x, g) < config.gtol) {
      report.converged = true;
      report.stop_reason = "gtol";
      break;
    }
    if (iter >= config.max_iter) break;

    const VectorXd u = to_logits(x);
    bool accepted = false;
    VectorXd x_new, g_new;
    double f_new = f;
    // Quasi-Newton direction first; projected steepest descent as fallback.
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const bool newton = attempt == 0 && !memory.empty();
      if (attempt == 0 && memory.empty()) continue;
      VectorXd dir = newton ? memory.direction(g) : VectorXd(-g);
      if (newton && g.dot(dir) >= 0.0) continue;
      double t = 1.0;
      if (!newton) {
        const double gmax = g.lpNorm<Eigen::Infinity>();
        t = gmax > 0.0 ? std::min(1.0, 0.5 / gmax) : 1.0;
      }
      for (int k = 0; k < 60; ++k, t *= 0.5) {
        VectorXd trial = project(from_logits(u + t * dir));
        const VectorXd step = to_logits(trial) - u;
        const double predicted = g.dot(step);
        if (!(predicted < 0.0)) {
          if (step.lpNorm<Eigen::Infinity>() == 0.0) break;
          continue;
        }
        VectorXd g_trial;
        const double f_trial = objective.value_and_gradient(trial, g_trial);
        if (std::isfinite(f_trial) && f_trial <= f + kArmijo * predicted) {
          x_new = std::move(trial);
          g_new = std::move(g_trial);
          f_new = f_trial;
          accepted = true;
          break;
        }
      }
      if (!accepted) memory.clear();
    }
    if (!accepted) {
      report.converged = true;
      report.stop_reason = "no-descent";
      break;
    }

    ++iter;
    memory.update(to_logits(x_new) - u, g_new - g);
    const double change = std::abs(f - f_new);
    const double scale = std::max(std::abs(f), std::abs(f_new));
    x = std::move(x_new);
    g = std::move(g_new);
    f = f_new;
    report.loss_trace.push_back(f);
    if (change <= config.ftol * scale) {
      report.converged = true;
      report.stop_reason = "ftol";
      break;
    }
  }

  Schedule result;
  result.kind = "spectral-optimized";
  result.eps0 = config.eps0;
  result.epsS = config.epsS;
  result.alpha_bar.resize(config.steps + 1);
  result.alpha_bar[0] = 1.0 - config.eps0;
  result.alpha_bar[config.steps] = config.epsS;
  result.alpha_bar.segment(1, n) = x;
  if (config.mode == OptimizeMode::constrained) {
    result.validate();
  } else {
    result.validate_box();
  }

  report.final_loss = f;
  report.iterations = iter;
  report.objective_evals = objective.evals();
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return {std::move(result), std::move(report)};
}

}  // namespace specsched
