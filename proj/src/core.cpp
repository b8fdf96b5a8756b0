#include "specsched/core.hpp"

#include "transfer_kernel.hpp"

#include <cmath>
#include <sstream>

namespace specsched {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

void require_same_dim(const SpectralModel& model, Index n, const char* op) {
  if (n != model.dim()) {
    std::ostringstream os;
    os << op << ": dimension mismatch (model " << model.dim() << ", got " << n << ")";
    throw ValidationError(os.str());
  }
}

}  // namespace

void SpectralModel::validate() const {
  require(eigenvalues.size() > 0, "SpectralModel: empty");
  require(eigenvalues.size() == mean_spectral.size(),
          "SpectralModel: eigenvalues and mean_spectral differ in length");
  for (Index i = 0; i < eigenvalues.size(); ++i) {
    require(std::isfinite(eigenvalues[i]) && eigenvalues[i] >= 0.0,
            "SpectralModel: eigenvalues must be finite and nonnegative");
    require(std::isfinite(mean_spectral[i]), "SpectralModel: non-finite mean");
  }
}

void Schedule::validate_box() const {
  require(alpha_bar.size() >= 2, "Schedule: needs at least one step");
  require(eps0 > 0.0 && eps0 < 1.0 && epsS > 0.0 && epsS < 1.0 && epsS < 1.0 - eps0,
          "Schedule: endpoint parameters out of range");
  const int S = steps();
  require(std::abs(alpha_bar[0] - (1.0 - eps0)) <= 1e-12,
          "Schedule: alpha_bar[0] must equal 1 - eps0");
  require(std::abs(alpha_bar[S] - epsS) <= 1e-12, "Schedule: alpha_bar[S] must equal epsS");
  for (int s = 0; s <= S; ++s) {
    require(std::isfinite(alpha_bar[s]) && alpha_bar[s] > 0.0 && alpha_bar[s] < 1.0,
            "Schedule: alpha_bar entries must lie in (0, 1)");
  }
}

void Schedule::validate() const {
  validate_box();
  for (int s = 1; s <= steps(); ++s) {
    if (alpha_bar[s - 1] < alpha_bar[s]) {
      std::ostringstream os;
      os << "Schedule: alpha_bar must be non-increasing (violated at s=" << s << ")";
      throw ValidationError(os.str());
    }
  }
}

void VeSchedule::validate() const {
  require(sigma.size() >= 2, "VeSchedule: needs at least one step");
  for (Index s = 0; s < sigma.size(); ++s) {
    require(std::isfinite(sigma[s]) && sigma[s] >= 0.0, "VeSchedule: sigma must be >= 0");
    if (s > 0) require(sigma[s] >= sigma[s - 1], "VeSchedule: sigma must be non-decreasing");
  }
}

std::string to_string(Process p) { return p == Process::ddim ? "ddim" : "ddpm"; }
std::string to_string(Formulation f) { return f == Formulation::vp ? "vp" : "ve"; }

Process parse_process(const std::string& s) {
  if (s == "ddim") return Process::ddim;
  if (s == "ddpm") return Process::ddpm;
  throw ValidationError("unknown process '" + s + "' (expected ddim or ddpm)");
}

VectorXd wiener_denoise(const SpectralModel& model, double alpha_bar, const VectorXd& v_t) {
  require_same_dim(model, v_t.size(), "wiener_denoise");
  require(alpha_bar > 0.0 && alpha_bar <= 1.0, "wiener_denoise: alpha_bar must be in (0, 1]");
  const double sq = std::sqrt(alpha_bar);
  const auto lam = model.eigenvalues.array();
  const auto den = alpha_bar * lam + (1.0 - alpha_bar);
  return ((sq * lam * v_t.array() + (1.0 - alpha_bar) * model.mean_spectral.array()) / den)
      .matrix();
}

DdimGains ddim_gains(double alpha_bar_prev, double alpha_bar_cur) {
  require(alpha_bar_cur > 0.0 && alpha_bar_prev < 1.0,
          "ddim_gains: alpha_bar values must lie in (0, 1)");
  require(alpha_bar_cur <= alpha_bar_prev, "ddim_gains: requires alpha_bar_cur <= alpha_bar_prev");
  const double a = std::sqrt(1.0 - alpha_bar_prev) / std::sqrt(1.0 - alpha_bar_cur);
  const double b = std::sqrt(alpha_bar_prev) - std::sqrt(alpha_bar_cur) * a;
  return {a, b};
}

StepGain vp_step_gain(double alpha_bar_prev, double alpha_bar_cur, double lambda) {
  const auto c = detail::ddim_step<double>(alpha_bar_prev, alpha_bar_cur, lambda);
  return {c.g, c.m};
}

StepGain ve_step_gain(double sigma_prev, double sigma_cur, double lambda) {
  if (!(sigma_cur > 0.0)) throw ValidationError("ve_step_gain: sigma_s must be positive");
  const double a = sigma_prev / sigma_cur;
  const double b = 1.0 - a;
  const double s2 = sigma_cur * sigma_cur;
  return {a + b * lambda / (lambda + s2), b * s2 / (lambda + s2)};
}

namespace detail {

RawTransfer compute_transfer(const VectorXd& eigenvalues, const VectorXd& alpha_bar,
                             Process process) {
  const Index d = eigenvalues.size();
  const int S = static_cast<int>(alpha_bar.size()) - 1;
  VectorXd prefix = VectorXd::Ones(d);
  VectorXd d2 = VectorXd::Zero(d);
  VectorXd var = VectorXd::Zero(d);
  for (int s = 1; s <= S; ++s) {
    const double p = alpha_bar[s - 1];
    const double c = alpha_bar[s];
    for (Index i = 0; i < d; ++i) {
      const auto k = step<double>(process, p, c, eigenvalues[i]);
      d2[i] += prefix[i] * k.m;
      var[i] += prefix[i] * prefix[i] * k.c_sq;
      prefix[i] *= k.g;
    }
  }
  return {prefix, d2, var};
}

VectorXd transfer_vjp(const VectorXd& eigenvalues, const VectorXd& alpha_bar, Process process,
                      const VectorXd& grad_d1, const VectorXd& grad_d2,
                      const VectorXd& grad_var) {
  const Index d = eigenvalues.size();
  const int S = static_cast<int>(alpha_bar.size()) - 1;
  // prefix(s, i) = prod_{j <= s} G_j for coordinate i.
  MatrixXd prefix(S + 1, d);
  std::vector<StepCoefficients<StepDual>> coef(static_cast<size_t>(S) * d);
  prefix.row(0).setOnes();
  for (int s = 1; s <= S; ++s) {
    const StepDual p(alpha_bar[s - 1], 1.0, 0.0);
    const StepDual c(alpha_bar[s], 0.0, 1.0);
    for (Index i = 0; i < d; ++i) {
      auto k = step<StepDual>(process, p, c, eigenvalues[i]);
      coef[static_cast<size_t>(s - 1) * d + i] = k;
      prefix(s, i) = prefix(s - 1, i) * k.g.v;
    }
  }

  VectorXd grad = VectorXd::Zero(S + 1);
  for (Index i = 0; i < d; ++i) {
    double suffix = 1.0;  // prod_{j > s} G_j
    double tail_mean = 0.0;  // sum_{k > s} (prod_{s < j < k} G_j) M_k
    double tail_var = 0.0;   // sum_{k > s} (prod_{s < j < k} G_j^2) c_k^2
    for (int s = S; s >= 1; --s) {
      const auto& k = coef[static_cast<size_t>(s - 1) * d + i];
      const double pre = prefix(s - 1, i);
      const double bar_g = grad_d1[i] * pre * suffix + grad_d2[i] * pre * tail_mean +
                           grad_var[i] * 2.0 * k.g.v * pre * pre * tail_var;
      const double bar_m = grad_d2[i] * pre;
      const double bar_c = grad_var[i] * pre * pre;
      grad[s - 1] += bar_g * k.g.dp + bar_m * k.m.dp + bar_c * k.c_sq.dp;
      grad[s] += bar_g * k.g.dc + bar_m * k.m.dc + bar_c * k.c_sq.dc;
      tail_mean = k.m.v + k.g.v * tail_mean;
      tail_var = k.c_sq.v + k.g.v * k.g.v * tail_var;
      suffix *= k.g.v;
    }
  }
  return grad;
}

}  // namespace detail

namespace {

Transfer make_transfer(const SpectralModel& model, const Schedule& schedule, Process process) {
  model.validate();
  schedule.validate();
  auto raw = detail::compute_transfer(model.eigenvalues, schedule.alpha_bar, process);
  Transfer t;
  t.d1 = std::move(raw.d1);
  t.d2 = std::move(raw.d2);
  t.var_extra = process == Process::ddim ? VectorXd::Zero(model.dim()) : std::move(raw.var_extra);
  t.process = process;
  t.formulation = Formulation::vp;
  return t;
}

}  // namespace

Transfer ddim_transfer(const SpectralModel& model, const Schedule& schedule) {
  return make_transfer(model, schedule, Process::ddim);
}

Transfer ddpm_transfer(const SpectralModel& model, const Schedule& schedule) {
  return make_transfer(model, schedule, Process::ddpm);
}

GaussianDiag intermediate_distribution(const SpectralModel& model, const Schedule& schedule,
                                       int l) {
  model.validate();
  schedule.validate();
  const int S = schedule.steps();
  if (l < 0 || l > S) {
    throw ValidationError("intermediate_distribution: step index out of range");
  }
  // Same left-to-right accumulation as the full transfer, restricted to the
  // steps l+1..S, so that l = 0 reproduces ddim_transfer bit for bit.
  const Index d = model.dim();
  VectorXd prefix = VectorXd::Ones(d);
  VectorXd offset = VectorXd::Zero(d);
  for (int s = l + 1; s <= S; ++s) {
    const double p = schedule.alpha_bar[s - 1];
    const double c = schedule.alpha_bar[s];
    for (Index i = 0; i < d; ++i) {
      const auto k = detail::ddim_step<double>(p, c, model.eigenvalues[i]);
      offset[i] += prefix[i] * k.m;
      prefix[i] *= k.g;
    }
  }
  GaussianDiag out;
  out.mean = (offset.array() * model.mean_spectral.array()).matrix();
  out.variance = prefix.array().square().matrix();
  return out;
}

GaussianDiag output_distribution(const Transfer& transfer, const SpectralModel& model) {
  require_same_dim(model, transfer.d1.size(), "output_distribution");
  require_same_dim(model, transfer.d2.size(), "output_distribution");
  require_same_dim(model, transfer.var_extra.size(), "output_distribution");
  GaussianDiag out;
  out.mean = (transfer.d2.array() * model.mean_spectral.array()).matrix();
  out.variance =
      (transfer.input_variance * transfer.d1.array().square() + transfer.var_extra.array())
          .matrix();
  return out;
}

MeanBias mean_bias(const Transfer& transfer, const SpectralModel& model) {
  require_same_dim(model, transfer.d2.size(), "mean_bias");
  MeanBias out;
  out.bias = ((transfer.d2.array() - 1.0) * model.mean_spectral.array()).matrix();
  out.d2_gap = (transfer.d2.array() - 1.0).abs().matrix();
  return out;
}

double sigma_to_alpha_bar(double sigma) {
  require(std::isfinite(sigma) && sigma >= 0.0, "sigma must be finite and >= 0");
  return 1.0 / (1.0 + sigma * sigma);
}

double alpha_bar_to_sigma(double alpha_bar) {
  require(alpha_bar > 0.0 && alpha_bar <= 1.0,
          "alpha_bar must be in (0, 1] for the VE conversion");
  return std::sqrt((1.0 - alpha_bar) / alpha_bar);
}

VeSchedule vp_to_ve(const Schedule& schedule) {
  schedule.validate();
  VeSchedule ve;
  ve.sigma.resize(schedule.alpha_bar.size());
  for (Index s = 0; s < ve.sigma.size(); ++s) ve.sigma[s] = alpha_bar_to_sigma(schedule.alpha_bar[s]);
  return ve;
}

Schedule ve_to_vp(const VeSchedule& ve) {
  ve.validate();
  Schedule out;
  out.alpha_bar.resize(ve.sigma.size());
  for (Index s = 0; s < ve.sigma.size(); ++s) out.alpha_bar[s] = sigma_to_alpha_bar(ve.sigma[s]);
  out.eps0 = 1.0 - out.alpha_bar[0];
  out.epsS = out.alpha_bar[out.alpha_bar.size() - 1];
  out.kind = "custom";
  out.validate();
  return out;
}

Transfer ve_ddim_transfer(const SpectralModel& model, const VeSchedule& ve) {
  model.validate();
  ve.validate();
  const int S = ve.steps();
  for (int s = 1; s <= S; ++s) {
    if (!(ve.sigma[s] > 0.0)) {
      throw ValidationError("ve_ddim_transfer: sigma must be strictly positive for s >= 1");
    }
  }
  const Index d = model.dim();
  VectorXd prefix = VectorXd::Ones(d);
  VectorXd d2 = VectorXd::Zero(d);
  for (int s = 1; s <= S; ++s) {
    for (Index i = 0; i < d; ++i) {
      const auto k = ve_step_gain(ve.sigma[s - 1], ve.sigma[s], model.eigenvalues[i]);
      d2[i] += prefix[i] * k.m;
      prefix[i] *= k.g;
    }
  }
  Transfer t;
  t.d1 = prefix;
  t.d2 = d2;
  t.var_extra = VectorXd::Zero(d);
  t.process = Process::ddim;
  t.formulation = Formulation::ve;
  t.input_variance = 1.0 + ve.sigma[S] * ve.sigma[S];
  return t;
}

}  // namespace specsched
