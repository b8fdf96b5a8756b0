#include "specsched/estimate.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

namespace specsched {

std::string to_string(Structure s) { return s == Structure::circulant ? "circulant" : "symmetric"; }

Structure parse_structure(const std::string& s) {
  if (s == "circulant") return Structure::circulant;
  if (s == "symmetric") return Structure::symmetric;
  throw ValidationError("unknown structure '" + s + "' (expected circulant or symmetric)");
}

void EstimationConfig::validate() const {
  if (window < 2) throw ValidationError("estimate: window must be at least 2");
  if (stride < 0) throw ValidationError("estimate: stride must be positive");
  if (!(silence_threshold >= 0.0)) throw ValidationError("estimate: threshold must be nonnegative");
}

MatrixXd real_fourier_basis(Index n) {
  if (n < 1) throw ValidationError("real_fourier_basis: n must be positive");
  MatrixXd U(n, n);
  const double dn = static_cast<double>(n);
  U.col(0).setConstant(1.0 / std::sqrt(dn));
  Index col = 1;
  for (Index k = 1; 2 * k < n; ++k) {
    for (Index j = 0; j < n; ++j) {
      const double theta = 2.0 * std::numbers::pi * static_cast<double>(j * k % n) / dn;
      U(j, col) = std::sqrt(2.0 / dn) * std::cos(theta);
      U(j, col + 1) = std::sqrt(2.0 / dn) * std::sin(theta);
    }
    col += 2;
  }
  if (n % 2 == 0) {
    for (Index j = 0; j < n; ++j) U(j, col) = (j % 2 ? -1.0 : 1.0) / std::sqrt(dn);
  }
  return U;
}

VectorXd symmetric_circulant_eigenvalues(const VectorXd& row) {
  const Index n = row.size();
  const double dn = static_cast<double>(n);
  auto lambda_at = [&](Index k) {
    double acc = 0.0;
    for (Index j = 0; j < n; ++j) {
      acc += row[j] * std::cos(2.0 * std::numbers::pi * static_cast<double>(j * k % n) / dn);
    }
    return acc;
  };
  VectorXd out(n);
  out[0] = lambda_at(0);
  Index col = 1;
  for (Index k = 1; 2 * k < n; ++k) {
    out[col] = out[col + 1] = lambda_at(k);
    col += 2;
  }
  if (n % 2 == 0) out[col] = lambda_at(n / 2);
  return out;
}

MatrixXd circulant_matrix(const VectorXd& row) {
  const Index n = row.size();
  MatrixXd C(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) C(i, j) = row[((j - i) % n + n) % n];
  }
  return C;
}

SyntheticModel synthetic_circulant_model(Index d, double l, double mu_const) {
  if (d < 2) throw ValidationError("synthetic model: d must be at least 2");
  if (!(l > 0.0)) throw ValidationError("synthetic model: l must be positive");
  const VectorXd a = VectorXd::LinSpaced(d, -l, l);
  const MatrixXd A = circulant_matrix(a);

  SyntheticModel out;
  out.dense.covariance = A.transpose() * A;
  // The product is symmetric only up to rounding; averaging makes it exact.
  out.dense.covariance = 0.5 * (out.dense.covariance + out.dense.covariance.transpose()).eval();
  out.dense.mean = VectorXd::Constant(d, mu_const);
  out.basis = real_fourier_basis(d);

  // Eigenvalues of A^T A are |DFT(a)_k|^2; they are exact squares, hence >= 0.
  const double dn = static_cast<double>(d);
  auto power = [&](Index k) {
    std::complex<double> acc = 0.0;
    for (Index j = 0; j < d; ++j) {
      acc += a[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j * k % d) / dn);
    }
    return std::norm(acc);
  };
  VectorXd lambda(d);
  lambda[0] = power(0);
  Index col = 1;
  for (Index k = 1; 2 * k < d; ++k) {
    lambda[col] = lambda[col + 1] = power(k);
    col += 2;
  }
  if (d % 2 == 0) lambda[col] = power(d / 2);

  out.spectral.eigenvalues = lambda;
  out.spectral.mean_spectral = out.basis.transpose() * out.dense.mean;
  // Only the constant column sees the constant mean; the rest is rounding.
  out.spectral.mean_spectral.tail(d - 1).setZero();
  out.spectral.mean_spectral[0] = mu_const * std::sqrt(dn);
  out.spectral.source = "synthetic-circulant(d=" + std::to_string(d) + ")";
  return out;
}

namespace {

bool is_silent(const double* x, Index n, double threshold) {
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += std::abs(x[i]);
  return acc / static_cast<double>(n) < threshold;
}

// Mean and unbiased covariance of the accepted windows (one per row).
CovarianceEstimate from_windows(const MatrixXd& windows, Structure structure, Index rejected) {
  const Index n = windows.rows();
  if (n == 0) throw ValidationError("estimate: every window was rejected as silent");
  CovarianceEstimate est;
  est.windows_used = n;
  est.windows_rejected = rejected;
  const Index d = windows.cols();
  if (structure == Structure::circulant) {
    est.mean = VectorXd::Constant(d, windows.mean());
  } else {
    est.mean = windows.colwise().mean().transpose();
  }
  const MatrixXd centered = windows.rowwise() - est.mean.transpose();
  const double divisor = n > 1 ? static_cast<double>(n - 1) : 1.0;
  est.covariance = centered.transpose() * centered / divisor;
  est.covariance = 0.5 * (est.covariance + est.covariance.transpose()).eval();
  return est;
}

}  // namespace

CovarianceEstimate sliding_window_covariance(const std::vector<double>& signal,
                                             const EstimationConfig& config) {
  config.validate();
  const Index d = config.window;
  const Index total = static_cast<Index>(signal.size());
  if (total < d) throw ValidationError("estimate: signal is shorter than one window");
  const Index stride = config.effective_stride();
  std::vector<Index> starts;
  Index rejected = 0;
  for (Index s = 0; s + d <= total; s += stride) {
    if (is_silent(signal.data() + s, d, config.silence_threshold)) {
      ++rejected;
    } else {
      starts.push_back(s);
    }
  }
  MatrixXd windows(static_cast<Index>(starts.size()), d);
  for (size_t r = 0; r < starts.size(); ++r) {
    windows.row(static_cast<Index>(r)) =
        Eigen::Map<const VectorXd>(signal.data() + starts[r], d).transpose();
  }
  return from_windows(windows, config.structure, rejected);
}

CovarianceEstimate row_covariance(const MatrixXd& rows, const EstimationConfig& config) {
  if (!(config.silence_threshold >= 0.0)) {
    throw ValidationError("estimate: threshold must be nonnegative");
  }
  if (rows.cols() < 1) throw ValidationError("estimate: rows are empty");
  std::vector<Index> keep;
  for (Index r = 0; r < rows.rows(); ++r) {
    const VectorXd row = rows.row(r).transpose();
    if (!is_silent(row.data(), row.size(), config.silence_threshold)) keep.push_back(r);
  }
  MatrixXd used(static_cast<Index>(keep.size()), rows.cols());
  for (size_t i = 0; i < keep.size(); ++i) used.row(static_cast<Index>(i)) = rows.row(keep[i]);
  return from_windows(used, config.structure, rows.rows() - static_cast<Index>(keep.size()));
}

VectorXd toeplitz_average(const MatrixXd& covariance) {
  const Index n = covariance.rows();
  if (covariance.cols() != n) throw ValidationError("toeplitz_average: matrix must be square");
  VectorXd row(n);
  for (Index k = 0; k < n; ++k) {
    double acc = 0.0;
    for (Index i = 0; i + k < n; ++i) acc += covariance(i, i + k) + covariance(i + k, i);
    row[k] = acc / (2.0 * static_cast<double>(n - k));
  }
  return row;
}

VectorXd circulant_projection(const VectorXd& toeplitz_row, Index n) {
  if (toeplitz_row.size() != n || n < 1) {
    throw ValidationError("circulant_projection: row length must equal n");
  }
  VectorXd out(n);
  out[0] = toeplitz_row[0];
  const double dn = static_cast<double>(n);
  for (Index k = 1; k < n; ++k) {
    out[k] = (toeplitz_row[k] * static_cast<double>(n - k) +
              toeplitz_row[n - k] * static_cast<double>(k)) /
             dn;
  }
  return out;
}

SpectralEstimate spectral_model_from_covariance(const CovarianceEstimate& estimate,
                                                Structure structure) {
  const Index d = estimate.covariance.rows();
  if (d == 0 || estimate.covariance.cols() != d || estimate.mean.size() != d) {
    throw ValidationError("spectral_model_from_covariance: inconsistent shapes");
  }
  if (!estimate.covariance.allFinite() || !estimate.mean.allFinite()) {
    throw NumericalError("spectral_model_from_covariance: non-finite entries");
  }
  SpectralEstimate out;
  VectorXd lambda;
  if (structure == Structure::circulant) {
    const VectorXd row = circulant_projection(toeplitz_average(estimate.covariance), d);
    out.basis = real_fourier_basis(d);
    lambda = symmetric_circulant_eigenvalues(row);
    out.model.source = "estimate:circulant";
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(estimate.covariance);
    if (eig.info() != Eigen::Success) {
      throw NumericalError("spectral_model_from_covariance: eigendecomposition failed");
    }
    // Eigen returns ascending order; store descending.
    lambda = eig.eigenvalues().reverse();
    out.basis = eig.eigenvectors().rowwise().reverse();
    out.model.source = "estimate:symmetric";
  }
  for (Index i = 0; i < d; ++i) {
    if (lambda[i] < 0.0) {
      lambda[i] = 0.0;
      ++out.floored;
    }
  }
  out.model.eigenvalues = lambda;
  out.model.mean_spectral = out.basis.transpose() * estimate.mean;
  return out;
}

SpectralModel pca_truncate(const SpectralModel& model, Index d_reduced) {
  model.validate();
  if (d_reduced < 1 || d_reduced > model.dim()) {
    throw ValidationError("pca_truncate: d_reduced must lie in [1, dim]");
  }
  std::vector<Index> order(static_cast<size_t>(model.dim()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    return model.eigenvalues[a] > model.eigenvalues[b];
  });
  SpectralModel out;
  out.eigenvalues.resize(d_reduced);
  out.mean_spectral.resize(d_reduced);
  for (Index i = 0; i < d_reduced; ++i) {
    out.eigenvalues[i] = model.eigenvalues[order[i]];
    out.mean_spectral[i] = model.mean_spectral[order[i]];
  }
  out.source = model.source + "[pca " + std::to_string(d_reduced) + "]";
  return out;
}

DenseGaussian dense_from_spectral(const SpectralModel& model, const MatrixXd& basis) {
  model.validate();
  if (basis.rows() != model.dim() || basis.cols() != model.dim()) {
    throw ValidationError("dense_from_spectral: basis shape does not match the model");
  }
  DenseGaussian g;
  g.covariance = basis * model.eigenvalues.asDiagonal() * basis.transpose();
  g.covariance = 0.5 * (g.covariance + g.covariance.transpose()).eval();
  g.mean = basis * model.mean_spectral;
  return g;
}

}  // namespace specsched
