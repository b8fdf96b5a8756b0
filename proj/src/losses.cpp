#include "specsched/losses.hpp"

#include "objective.hpp"
#include "transfer_kernel.hpp"

#include <cmath>
#include <limits>

namespace specsched {

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::wasserstein2: return "w2";
    case LossKind::kl: return "kl";
    case LossKind::weighted_l1: return "wl1";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& s) {
  if (s == "w2" || s == "wasserstein2") return LossKind::wasserstein2;
  if (s == "kl") return LossKind::kl;
  if (s == "wl1" || s == "weighted_l1") return LossKind::weighted_l1;
  throw ValidationError("unknown loss kind '" + s + "' (expected w2, kl or wl1)");
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Per-coordinate view of a generated Gaussian against the target.
struct Outputs {
  const VectorXd& d1;
  const VectorXd& d2;
  const VectorXd& var_extra;  // may be empty (treated as zero)
  double input_variance;

  double variance(Index i) const {
    const double v = input_variance * d1[i] * d1[i];
    return var_extra.size() ? v + var_extra[i] : v;
  }
};

// Partials of the loss with respect to the total variance e^2 and D2.
struct Partials {
  VectorXd d_var;
  VectorXd d_d2;
};

// Evaluates the loss; fills partials if requested. `strict` turns an
// undefined objective into an exception instead of +inf.
double evaluate(LossKind kind, const SpectralModel& model, const Outputs& out,
                Partials* partials, bool strict) {
  const VectorXd& lambda = model.eigenvalues;
  const VectorXd& mu = model.mean_spectral;
  const Index d = lambda.size();
  if (out.d1.size() != d || out.d2.size() != d ||
      (out.var_extra.size() != 0 && out.var_extra.size() != d)) {
    throw ValidationError("loss: transfer and model dimensions differ");
  }
  if (partials) {
    partials->d_var = VectorXd::Zero(d);
    partials->d_d2 = VectorXd::Zero(d);
  }

  double total = 0.0;
  switch (kind) {
    case LossKind::wasserstein2: {
      for (Index i = 0; i < d; ++i) {
        const double e = std::sqrt(out.variance(i));
        const double gap = out.d2[i] - 1.0;
        const double r = std::sqrt(lambda[i]) - e;
        total += r * r + mu[i] * mu[i] * gap * gap;
        if (partials) {
          // d/d(e^2) of (sqrt(lambda) - e)^2 = -(sqrt(lambda) - e) / e.
          partials->d_var[i] = e > 0.0 ? -r / e : 0.0;
          partials->d_d2[i] = 2.0 * mu[i] * mu[i] * gap;
        }
      }
      return total;
    }
    case LossKind::kl: {
      Index included = 0;
      for (Index i = 0; i < d; ++i) {
        if (lambda[i] < kEigenvalueFloor) continue;
        ++included;
        const double q = out.variance(i);
        if (!(q > 0.0)) {
          if (strict) throw NumericalError("kl_loss: generated variance is zero");
          return kInf;
        }
        const double gap = out.d2[i] - 1.0;
        const double num = lambda[i] + gap * gap * mu[i] * mu[i];
        total += 0.5 * (std::log(q) - std::log(lambda[i]) - 1.0 + num / q);
        if (partials) {
          partials->d_var[i] = 0.5 * (1.0 / q - num / (q * q));
          partials->d_d2[i] = gap * mu[i] * mu[i] / q;
        }
      }
      if (included == 0) {
        throw ValidationError("kl_loss: every eigenvalue is below the floor");
      }
      return total;
    }
    case LossKind::weighted_l1: {
      const double lambda_sum = lambda.sum();
      if (!(lambda_sum > 0.0)) throw ValidationError("weighted_l1_loss: all eigenvalues are zero");
      const double mu_sq_sum = mu.squaredNorm();
      for (Index i = 0; i < d; ++i) {
        const double w = lambda[i] / lambda_sum;
        const double diff = out.variance(i) - lambda[i];
        total += w * std::abs(diff);
        if (partials) partials->d_var[i] = diff > 0.0 ? w : (diff < 0.0 ? -w : 0.0);
        if (mu_sq_sum > 0.0) {
          const double m = mu[i] * mu[i] / mu_sq_sum;
          const double gap = out.d2[i] - 1.0;
          total += m * gap * gap;
          if (partials) partials->d_d2[i] = 2.0 * m * gap;
        }
      }
      return total;
    }
  }
  throw ValidationError("loss: unknown kind");
}

double transfer_loss(LossKind kind, const SpectralModel& model, const Transfer& t) {
  model.validate();
  return evaluate(kind, model, Outputs{t.d1, t.d2, t.var_extra, t.input_variance}, nullptr, true);
}

}  // namespace

double w2_loss(const SpectralModel& model, const Transfer& transfer) {
  return transfer_loss(LossKind::wasserstein2, model, transfer);
}

double kl_loss(const SpectralModel& model, const Transfer& transfer) {
  return transfer_loss(LossKind::kl, model, transfer);
}

double weighted_l1_loss(const SpectralModel& model, const Transfer& transfer) {
  return transfer_loss(LossKind::weighted_l1, model, transfer);
}

double loss_value(LossKind kind, const SpectralModel& model, const Transfer& transfer) {
  return transfer_loss(kind, model, transfer);
}

double schedule_loss(const SpectralModel& model, const Schedule& schedule, LossKind kind,
                     Process process) {
  const Transfer t =
      process == Process::ddim ? ddim_transfer(model, schedule) : ddpm_transfer(model, schedule);
  return loss_value(kind, model, t);
}

namespace detail {

double raw_loss(const SpectralModel& model, const VectorXd& alpha_bar, LossKind kind,
                Process process) {
  const RawTransfer t = compute_transfer(model.eigenvalues, alpha_bar, process);
  const double v = evaluate(kind, model, Outputs{t.d1, t.d2, t.var_extra, 1.0}, nullptr, false);
  return std::isfinite(v) ? v : kInf;
}

double raw_loss_and_gradient(const SpectralModel& model, const VectorXd& alpha_bar,
                             LossKind kind, Process process, VectorXd& grad_full) {
  const RawTransfer t = compute_transfer(model.eigenvalues, alpha_bar, process);
  Partials p;
  const double v = evaluate(kind, model, Outputs{t.d1, t.d2, t.var_extra, 1.0}, &p, false);
  if (!std::isfinite(v)) {
    grad_full = VectorXd::Zero(alpha_bar.size());
    return kInf;
  }
  // e^2 = D1^2 + var_extra, so dL/dD1 = 2 D1 dL/d(e^2) and dL/dvar = dL/d(e^2).
  const VectorXd grad_d1 = 2.0 * t.d1.cwiseProduct(p.d_var);
  grad_full = transfer_vjp(model.eigenvalues, alpha_bar, process, grad_d1, p.d_d2, p.d_var);
  return v;
}

}  // namespace detail

VectorXd loss_gradient(const SpectralModel& model, const Schedule& schedule, LossKind kind,
                       Process process, double rel_step) {
  model.validate();
  schedule.validate();
  if (!(rel_step > 0.0)) throw ValidationError("loss_gradient: step must be positive");
  const int S = schedule.steps();
  VectorXd grad = VectorXd::Zero(std::max(S - 1, 0));
  VectorXd x = schedule.alpha_bar;
  for (int s = 1; s < S; ++s) {
    const double xs = x[s];
    const double h = rel_step * std::max(1.0, std::abs(xs));
    const double up = 0.5 * (x[s - 1] - xs);    // room towards alpha_bar_{s-1}
    const double down = 0.5 * (xs - x[s + 1]);  // room towards alpha_bar_{s+1}
    const double hc = std::min({h, up, down});
    double g = 0.0;
    if (hc > 0.0) {
      x[s] = xs + hc;
      const double fp = detail::raw_loss(model, x, kind, process);
      x[s] = xs - hc;
      const double fm = detail::raw_loss(model, x, kind, process);
      g = (fp - fm) / (2.0 * hc);
    } else if (up > 0.0 || down > 0.0) {
      x[s] = xs;
      const double f0 = detail::raw_loss(model, x, kind, process);
      if (up > 0.0) {
        const double hf = std::min(h, up);
        x[s] = xs + hf;
        g = (detail::raw_loss(model, x, kind, process) - f0) / hf;
      } else {
        const double hb = std::min(h, down);
        x[s] = xs - hb;
        g = (f0 - detail::raw_loss(model, x, kind, process)) / hb;
      }
    } else {
      throw ValidationError("loss_gradient: degenerate spacing around alpha_bar_" +
                            std::to_string(s));
    }
    x[s] = xs;
    if (!std::isfinite(g)) throw NumericalError("loss_gradient: non-finite difference");
    grad[s - 1] = g;
  }
  return grad;
}

VectorXd analytic_loss_gradient(const SpectralModel& model, const Schedule& schedule,
                                LossKind kind, Process process) {
  model.validate();
  schedule.validate();
  VectorXd full;
  const double v = detail::raw_loss_and_gradient(model, schedule.alpha_bar, kind, process, full);
  if (!std::isfinite(v)) throw NumericalError("analytic_loss_gradient: objective is undefined");
  return full.segment(1, std::max(schedule.steps() - 1, 0));
}

}  // namespace specsched
