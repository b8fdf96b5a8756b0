// Gaussian data model in its eigenbasis and the closed-form transfer function
// of discrete reverse diffusion processes (DDIM with eta = 0, DDPM), in both
// the variance-preserving and the variance-exploding parameterization.
//
// Conventions used throughout the library:
//   * alpha_bar has length S + 1; index 0 is the cleanest level and index S
//     the noisiest. The reverse recursion runs s = S..1 and produces s - 1.
//   * v denotes a signal projected on the eigenbasis U of the covariance,
//     v = U^T x. Every per-step map is diagonal in that basis.
//   * D1 = prod_{k=1..S} G(k) and D2 = sum_{i=1..S} (prod_{j<i} G(j)) M(i),
//     accumulated left to right in double precision.

#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace specsched {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kDefaultEps0 = 1e-4;
inline constexpr double kDefaultEpsS = 4e-5;
/// Eigenvalues below this are treated as zero by the KL objective.
inline constexpr double kEigenvalueFloor = 1e-12;

/// Bad input: wrong dimensions, out-of-range parameters, broken invariants.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A computation produced or would produce a non-finite or undefined value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gaussian target N(mu0, Sigma0) expressed in the eigenbasis of Sigma0.
struct SpectralModel {
  VectorXd eigenvalues;    // lambda_i >= 0
  VectorXd mean_spectral;  // U^T mu0
  std::string source;

  Index dim() const { return eigenvalues.size(); }
  void validate() const;
};

/// Noise schedule alpha_bar_0 .. alpha_bar_S with fixed endpoint parameters.
struct Schedule {
  /// Family tag, e.g. "linear", "cosine(0,1,1)", "spectral-optimized".
  std::string kind = "custom";
  VectorXd alpha_bar;
  double eps0 = kDefaultEps0;
  double epsS = kDefaultEpsS;

  int steps() const { return static_cast<int>(alpha_bar.size()) - 1; }

  /// Endpoints, open unit interval, and monotone non-increasing.
  void validate() const;
  /// Endpoints and open unit interval only (no ordering requirement).
  void validate_box() const;
};

enum class Process { ddim, ddpm };
enum class Formulation { vp, ve };

std::string to_string(Process p);
std::string to_string(Formulation f);
Process parse_process(const std::string& s);

/// Diagonal output map of a reverse process: v0_hat = D1 vS + D2 mu + noise.
struct Transfer {
  VectorXd d1;
  VectorXd d2;
  /// Extra output variance from DDPM's injected noise; zero for DDIM.
  VectorXd var_extra;
  Process process = Process::ddim;
  Formulation formulation = Formulation::vp;
  /// Variance of each coordinate of the initial noise vS. 1 in VP; 1 + sigma_S^2
  /// in VE, where x_bar_S = x_S * sqrt(1 + sigma_S^2).
  double input_variance = 1.0;
};

struct GaussianDiag {
  VectorXd mean;
  VectorXd variance;
};

/// Variance-exploding noise levels; sigma[0] is the cleanest level.
struct VeSchedule {
  VectorXd sigma;

  int steps() const { return static_cast<int>(sigma.size()) - 1; }
  void validate() const;
};

struct DdimGains {
  double a;
  double b;
};

/// Posterior mean of v0 given v_t under x_t = sqrt(ab) x0 + sqrt(1 - ab) eps,
/// applied coordinatewise in the eigenbasis.
VectorXd wiener_denoise(const SpectralModel& model, double alpha_bar,
                        const VectorXd& v_t);

/// Coefficients of x_{s-1} = a_s x_s + b_s x0_hat for deterministic DDIM.
DdimGains ddim_gains(double alpha_bar_prev, double alpha_bar_cur);

Transfer ddim_transfer(const SpectralModel& model, const Schedule& schedule);
Transfer ddpm_transfer(const SpectralModel& model, const Schedule& schedule);

/// Distribution of the DDIM state v_l for vS ~ N(0, I). l = S is the prior,
/// l = 0 is the generated output.
GaussianDiag intermediate_distribution(const SpectralModel& model,
                                       const Schedule& schedule, int l);

/// N(D2 mu, input_variance * D1^2 + var_extra).
GaussianDiag output_distribution(const Transfer& transfer,
                                 const SpectralModel& model);

struct MeanBias {
  VectorXd bias;            // (D2_i - 1) mu_i
  VectorXd d2_gap;          // |D2_i - 1|
};

MeanBias mean_bias(const Transfer& transfer, const SpectralModel& model);

/// alpha_bar = 1 / (1 + sigma^2).
double sigma_to_alpha_bar(double sigma);
/// sigma = sqrt((1 - alpha_bar) / alpha_bar); rejects alpha_bar <= 0.
double alpha_bar_to_sigma(double alpha_bar);

VeSchedule vp_to_ve(const Schedule& schedule);
/// Endpoint parameters of the result are read off its first and last entry.
Schedule ve_to_vp(const VeSchedule& ve);

/// DDIM transfer with VE gains G = ab + bb lambda / (lambda + sigma^2) and
/// M = bb sigma^2 / (lambda + sigma^2), ab = sigma_{s-1} / sigma_s, bb = 1 - ab.
Transfer ve_ddim_transfer(const SpectralModel& model, const VeSchedule& ve);

/// Per-step VP gains for a single eigenvalue; exposed for diagnostics.
struct StepGain {
  double g;
  double m;
};
StepGain vp_step_gain(double alpha_bar_prev, double alpha_bar_cur, double lambda);
StepGain ve_step_gain(double sigma_prev, double sigma_cur, double lambda);

}  // namespace specsched
