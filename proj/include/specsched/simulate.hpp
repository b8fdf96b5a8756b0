// Time-domain Monte Carlo of the reverse process with the exact Wiener
// denoiser, used as an independent check of the spectral closed forms, plus
// per-step dynamics diagnostics computed from the closed forms.

#pragma once

#include "specsched/core.hpp"

#include <cstdint>

namespace specsched {

/// Gaussian target in the original (time / pixel) coordinates.
struct DenseGaussian {
  VectorXd mean;
  MatrixXd covariance;

  Index dim() const { return mean.size(); }
  /// Symmetric to 1e-12 and no eigenvalue below -1e-10.
  void validate() const;
};

struct SimConfig {
  Process process = Process::ddim;
  Index samples = 1000;
  std::uint64_t seed = 0;
  Schedule schedule;
  /// Worker threads; 0 means hardware concurrency. Output does not depend on it.
  int threads = 0;
};

/// Affine map x -> linear * x + offset.
struct AffineMap {
  MatrixXd linear;
  VectorXd offset;
};

/// One reverse step s -> s-1 (s = 1..S) with epsilon taken from the Wiener
/// denoiser, excluding DDPM's injected noise.
AffineMap reverse_step_map(const DenseGaussian& target, double alpha_bar_prev,
                           double alpha_bar_cur, Process process);

/// Composition of all reverse steps: x0_hat = linear * x_S + offset (+ noise for DDPM).
AffineMap composed_reverse_map(const DenseGaussian& target, const Schedule& schedule,
                               Process process);

/// n x d matrix of generated samples. x_S ~ N(0, I). Sample i uses the
/// random stream (seed, i): first d normals for x_S, then d per DDPM step.
MatrixXd simulate_reverse(const DenseGaussian& target, const SimConfig& config);

/// Sample mean and unbiased (n - 1) covariance.
DenseGaussian empirical_moments(const MatrixXd& samples);

/// Row l (l = 0..S) holds |lambda - var_l| / (lambda + 1e-12) per coordinate,
/// where var_l is the variance of the DDIM state at step l.
MatrixXd relative_error_dynamics(const SpectralModel& model, const Schedule& schedule);

/// Entry l is the squared W2 distance between the DDIM state at step l and the target.
VectorXd w2_dynamics(const SpectralModel& model, const Schedule& schedule);

}  // namespace specsched
