#include "specsched/simulate.hpp"

#include "specsched/rng.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <thread>
#include <vector>

namespace specsched {

void DenseGaussian::validate() const {
  const Index d = mean.size();
  if (d == 0) throw ValidationError("DenseGaussian: empty");
  if (covariance.rows() != d || covariance.cols() != d) {
    throw ValidationError("DenseGaussian: covariance shape does not match the mean");
  }
  if (!mean.allFinite() || !covariance.allFinite()) {
    throw ValidationError("DenseGaussian: non-finite entries");
  }
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError("DenseGaussian: covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(covariance, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw NumericalError("DenseGaussian: eigensolver failed");
  if (eig.eigenvalues().minCoeff() < -1e-10) {
    throw ValidationError("DenseGaussian: covariance is not positive semidefinite");
  }
}

AffineMap reverse_step_map(const DenseGaussian& target, double p, double c, Process process) {
  const Index d = target.dim();
  const MatrixXd I = MatrixXd::Identity(d, d);
  // Wiener denoiser: x0_hat = mu + sqrt(c) Sigma K^-1 (x - sqrt(c) mu), K = c Sigma + (1 - c) I.
  const MatrixXd K = c * target.covariance + (1.0 - c) * I;
  MatrixXd W = K.ldlt().solve(target.covariance);
  W = 0.5 * (W + W.transpose()).eval();
  const double sc = std::sqrt(c);
  const MatrixXd x0_lin = sc * W;
  const VectorXd x0_off = target.mean - c * (W * target.mean);
  // epsilon = (x - sqrt(c) x0_hat) / sqrt(1 - c)
  const double sn = std::sqrt(1.0 - c);
  const MatrixXd eps_lin = (I - sc * x0_lin) / sn;
  const VectorXd eps_off = -sc * x0_off / sn;

  AffineMap map;
  if (process == Process::ddim) {
    // x_{s-1} = sqrt(p) x0_hat + sqrt(1 - p) epsilon
    const double sp = std::sqrt(p);
    const double sq = std::sqrt(1.0 - p);
    map.linear = sp * x0_lin + sq * eps_lin;
    map.offset = sp * x0_off + sq * eps_off;
  } else {
    // x_{s-1} = (x - (1 - alpha) / sqrt(1 - c) epsilon) / sqrt(alpha), alpha = c / p
    const double alpha = c / p;
    const double k = (1.0 - alpha) / sn;
    const double inv = 1.0 / std::sqrt(alpha);
    map.linear = inv * (I - k * eps_lin);
    map.offset = -inv * k * eps_off;
  }
  return map;
}

namespace {

void check_inputs(const DenseGaussian& target, const Schedule& schedule) {
  target.validate();
  schedule.validate();
}

double ddpm_noise_std(double p, double c) {
  const double alpha = c / p;
  return std::sqrt(std::max(0.0, (1.0 - p) / (1.0 - c) * (1.0 - alpha)));
}

}  // namespace

AffineMap composed_reverse_map(const DenseGaussian& target, const Schedule& schedule,
                               Process process) {
  check_inputs(target, schedule);
  const Index d = target.dim();
  AffineMap total{MatrixXd::Identity(d, d), VectorXd::Zero(d)};
  const auto& ab = schedule.alpha_bar;
  for (int s = schedule.steps(); s >= 1; --s) {
    const AffineMap step = reverse_step_map(target, ab[s - 1], ab[s], process);
    total.offset = step.linear * total.offset + step.offset;
    total.linear = step.linear * total.linear;
  }
  return total;
}

MatrixXd simulate_reverse(const DenseGaussian& target, const SimConfig& config) {
  check_inputs(target, config.schedule);
  if (config.samples < 1) throw ValidationError("simulate: samples must be at least 1");
  const Index d = target.dim();
  const Index n = config.samples;
  const int S = config.schedule.steps();
  const auto& ab = config.schedule.alpha_bar;

  // Precompute maps once: folded for DDIM, per step for DDPM (noise enters
  // between steps).
  std::vector<AffineMap> steps;
  std::vector<double> noise_std;
  AffineMap folded;
  if (config.process == Process::ddim) {
    folded = composed_reverse_map(target, config.schedule, Process::ddim);
  } else {
    for (int s = S; s >= 1; --s) {
      steps.push_back(reverse_step_map(target, ab[s - 1], ab[s], Process::ddpm));
      noise_std.push_back(ddpm_noise_std(ab[s - 1], ab[s]));
    }
  }

  MatrixXd out(n, d);
  auto run = [&](Index begin, Index end) {
    VectorXd x(d), z(d);
    for (Index i = begin; i < end; ++i) {
      CounterRng rng(config.seed, static_cast<std::uint64_t>(i));
      for (Index j = 0; j < d; ++j) x[j] = rng.normal();
      if (config.process == Process::ddim) {
        out.row(i) = (folded.linear * x + folded.offset).transpose();
      } else {
        for (size_t k = 0; k < steps.size(); ++k) {
          for (Index j = 0; j < d; ++j) z[j] = rng.normal();
          x = steps[k].linear * x + steps[k].offset + noise_std[k] * z;
        }
        out.row(i) = x.transpose();
      }
    }
  };

  unsigned threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                        : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<Index>(threads, n));
  if (threads <= 1) {
    run(0, n);
  } else {
    std::vector<std::thread> pool;
    const Index chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const Index begin = t * chunk;
      const Index end = std::min(n, begin + chunk);
      if (begin < end) pool.emplace_back(run, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  return out;
}

DenseGaussian empirical_moments(const MatrixXd& samples) {
  if (samples.rows() < 2) throw ValidationError("empirical_moments: need at least two samples");
  DenseGaussian g;
  g.mean = samples.colwise().mean().transpose();
  const MatrixXd centered = samples.rowwise() - g.mean.transpose();
  g.covariance = (centered.transpose() * centered) / static_cast<double>(samples.rows() - 1);
  g.covariance = 0.5 * (g.covariance + g.covariance.transpose()).eval();
  return g;
}

MatrixXd relative_error_dynamics(const SpectralModel& model, const Schedule& schedule) {
  constexpr double kDivisorEps = 1e-12;
  const int S = schedule.steps();
  MatrixXd out(S + 1, model.dim());
  for (int l = 0; l <= S; ++l) {
    const GaussianDiag g = intermediate_distribution(model, schedule, l);
    out.row(l) = ((model.eigenvalues - g.variance).cwiseAbs().array() /
                  (model.eigenvalues.array() + kDivisorEps))
                     .matrix()
                     .transpose();
  }
  return out;
}

VectorXd w2_dynamics(const SpectralModel& model, const Schedule& schedule) {
  const int S = schedule.steps();
  VectorXd out(S + 1);
  for (int l = 0; l <= S; ++l) {
    const GaussianDiag g = intermediate_distribution(model, schedule, l);
    double total = 0.0;
    for (Index i = 0; i < model.dim(); ++i) {
      const double r = std::sqrt(model.eigenvalues[i]) - std::sqrt(g.variance[i]);
      const double m = g.mean[i] - model.mean_spectral[i];
      total += r * r + m * m;
    }
    out[l] = total;
  }
  return out;
}

}  // namespace specsched
