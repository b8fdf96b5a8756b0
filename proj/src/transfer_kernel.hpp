// Per-step coefficient kernels shared by the transfer computation and the
// analytic gradient. Step functions are templated on the scalar so the same
// expressions yield values (double) and first partials (StepDual).

#pragma once

#include "specsched/core.hpp"

#include <cmath>
#include <vector>

namespace specsched::detail {

/// Forward-mode dual number carrying partials with respect to
/// alpha_bar_{s-1} (dp) and alpha_bar_s (dc).
struct StepDual {
  double v = 0.0;
  double dp = 0.0;
  double dc = 0.0;

  StepDual() = default;
  StepDual(double value) : v(value) {}  // NOLINT: implicit constant lift
  StepDual(double value, double p, double c) : v(value), dp(p), dc(c) {}
};

inline StepDual operator+(StepDual x, StepDual y) { return {x.v + y.v, x.dp + y.dp, x.dc + y.dc}; }
inline StepDual operator-(StepDual x, StepDual y) { return {x.v - y.v, x.dp - y.dp, x.dc - y.dc}; }
inline StepDual operator*(StepDual x, StepDual y) {
  return {x.v * y.v, x.dp * y.v + x.v * y.dp, x.dc * y.v + x.v * y.dc};
}
inline StepDual operator/(StepDual x, StepDual y) {
  const double inv = 1.0 / y.v;
  const double q = x.v * inv;
  return {q, (x.dp - q * y.dp) * inv, (x.dc - q * y.dc) * inv};
}
inline StepDual sqrt(StepDual x) {
  const double r = std::sqrt(x.v);
  const double k = 0.5 / r;
  return {r, x.dp * k, x.dc * k};
}

inline double value_of(double x) { return x; }
inline double value_of(const StepDual& x) { return x.v; }

template <class T>
struct StepCoefficients {
  T g;
  T m;
  T c_sq;  // DDPM injected-noise variance; zero for DDIM
};

/// p = alpha_bar_{s-1}, c = alpha_bar_s.
template <class T>
StepCoefficients<T> ddim_step(T p, T c, double lambda) {
  using std::sqrt;
  const T a = sqrt(T(1.0) - p) / sqrt(T(1.0) - c);
  const T b = sqrt(p) - sqrt(c) * a;
  const T den = c * lambda + (T(1.0) - c);
  const T g = a + b * sqrt(c) * lambda / den;
  const T m = b * (T(1.0) - c) / den;
  return {g, m, T(0.0)};
}

template <class T>
StepCoefficients<T> ddpm_step(T p, T c, double lambda) {
  using std::sqrt;
  const T alpha = c / p;
  const T one_minus_c = T(1.0) - c;
  const T a = (alpha - c) / (one_minus_c * sqrt(alpha));
  const T b = sqrt(p) * (T(1.0) - alpha) / one_minus_c;
  T c_sq = (T(1.0) - p) / one_minus_c * (T(1.0) - alpha);
  if (value_of(c_sq) < 0.0) c_sq = T(0.0);
  const T den = c * lambda + one_minus_c;
  const T g = a + b * sqrt(c) * lambda / den;
  const T m = b * one_minus_c / den;
  return {g, m, c_sq};
}

template <class T>
StepCoefficients<T> step(Process process, T p, T c, double lambda) {
  return process == Process::ddim ? ddim_step(p, c, lambda) : ddpm_step(p, c, lambda);
}

struct RawTransfer {
  VectorXd d1;
  VectorXd d2;
  VectorXd var_extra;
};

/// Transfer from a raw alpha_bar vector without schedule validation.
RawTransfer compute_transfer(const VectorXd& eigenvalues, const VectorXd& alpha_bar,
                             Process process);

/// Reverse-mode accumulation of dL/d alpha_bar given dL/dD1, dL/dD2 and
/// dL/dVar_extra per coordinate. Returns a vector of length S + 1.
VectorXd transfer_vjp(const VectorXd& eigenvalues, const VectorXd& alpha_bar,
                      Process process, const VectorXd& grad_d1,
                      const VectorXd& grad_d2, const VectorXd& grad_var);

}  // namespace specsched::detail
