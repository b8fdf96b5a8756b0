// Building SpectralModels from data: sliding-window covariance estimation
// with silence rejection, Toeplitz averaging and circulant projection, dense
// symmetric eigendecomposition, PCA truncation, and the synthetic circulant
// benchmark model.

#pragma once

#include "specsched/core.hpp"
#include "specsched/simulate.hpp"

#include <string>
#include <vector>

namespace specsched {

enum class Structure { circulant, symmetric };

std::string to_string(Structure s);
Structure parse_structure(const std::string& s);

struct EstimationConfig {
  Index window = 400;
  /// 0 means "equal to window" (non-overlapping windows).
  Index stride = 0;
  /// A window is rejected when its mean absolute amplitude is below this.
  double silence_threshold = 0.05;
  Structure structure = Structure::circulant;

  Index effective_stride() const { return stride > 0 ? stride : window; }
  void validate() const;
};

struct CovarianceEstimate {
  VectorXd mean;
  MatrixXd covariance;
  Index windows_used = 0;
  Index windows_rejected = 0;
};

struct SpectralEstimate {
  SpectralModel model;
  /// Orthonormal basis U (columns) with model eigenvalues as diag(U^T Sigma U).
  MatrixXd basis;
  /// Number of negative eigenvalues clamped to zero.
  Index floored = 0;
};

struct SyntheticModel {
  DenseGaussian dense;
  SpectralModel spectral;
  MatrixXd basis;
};

/// Sigma = A^T A with A circulant with first row linspace(-l, l, d), and
/// mean mu_const * 1. The spectral model is expressed in the real Fourier basis.
SyntheticModel synthetic_circulant_model(Index d, double l, double mu_const);

/// Real orthonormal Fourier basis of R^n, columns ordered as: constant,
/// (cos k, sin k) for k = 1..(n-1)/2, then the alternating column if n is even.
/// Every symmetric circulant matrix is diagonal in this basis.
MatrixXd real_fourier_basis(Index n);

/// Eigenvalues of the symmetric circulant matrix with first row `row`, in
/// the column order of real_fourier_basis.
VectorXd symmetric_circulant_eigenvalues(const VectorXd& row);

/// Dense circulant matrix with first row `row`: C(i, j) = row((j - i) mod n).
MatrixXd circulant_matrix(const VectorXd& row);

/// Windows of a 1-d stream.
CovarianceEstimate sliding_window_covariance(const std::vector<double>& signal,
                                             const EstimationConfig& config);

/// Each row is one observation (e.g. a flattened image). The silence rule
/// applies per row; window / stride are ignored.
CovarianceEstimate row_covariance(const MatrixXd& rows, const EstimationConfig& config);

/// First row of the nearest symmetric Toeplitz matrix (Frobenius norm).
VectorXd toeplitz_average(const MatrixXd& covariance);

/// First row of the circulant matrix balancing agreement with the Toeplitz
/// row: X_A[k] = (X_B[k] (n - k) + X_B[n - k] k) / n.
VectorXd circulant_projection(const VectorXd& toeplitz_row, Index n);

SpectralEstimate spectral_model_from_covariance(const CovarianceEstimate& estimate,
                                                Structure structure);

/// Keeps the d_reduced largest eigenvalues (and their mean components).
SpectralModel pca_truncate(const SpectralModel& model, Index d_reduced);

/// Dense Gaussian U diag(lambda) U^T, U mu.
DenseGaussian dense_from_spectral(const SpectralModel& model, const MatrixXd& basis);

}  // namespace specsched
