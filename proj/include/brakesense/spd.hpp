#pragma once

#include "brakesense/types.hpp"

#include <Eigen/Core>

#include <functional>
#include <span>

namespace brakesense {

/// Symmetric positive-definite matrix (covariances, class means).
class SpdMatrix {
 public:
  /// Validates symmetry (1e-10 relative) and positive eigenvalues; throws NumericalError.
  explicit SpdMatrix(Eigen::MatrixXd m);
  /// Symmetrizes without checking; for values SPD by construction.
  static SpdMatrix trusted(Eigen::MatrixXd m);

  const Eigen::MatrixXd& matrix() const { return m_; }
  Eigen::Index dim() const { return m_.rows(); }

 private:
  struct Unchecked {};
  SpdMatrix(Eigen::MatrixXd m, Unchecked) : m_(std::move(m)) {}
  Eigen::MatrixXd m_;
};

using WindowRef = Eigen::Ref<const SampleMatrix>;

/// (1 - lambda) * S + lambda * tr(S)/C * I, S the unbiased covariance after
/// per-channel mean removal.
SpdMatrix estimate_covariance(const WindowRef& window, double shrinkage);

/// f applied to the eigenvalues of a symmetric matrix.
Eigen::MatrixXd symmetric_function(const Eigen::MatrixXd& m, const std::function<double(double)>& f);
Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m);
Eigen::MatrixXd spd_invsqrt(const Eigen::MatrixXd& m);
Eigen::MatrixXd spd_log(const Eigen::MatrixXd& m);
Eigen::MatrixXd spd_exp(const Eigen::MatrixXd& m);

/// Affine-invariant distance ||log(A^-1/2 B A^-1/2)||_F.
double riemannian_distance(const SpdMatrix& a, const SpdMatrix& b);
/// Same distance when A^-1/2 is already known.
double riemannian_distance_whitened(const Eigen::MatrixXd& a_invsqrt, const SpdMatrix& b);

struct GeometricMean {
  SpdMatrix mean;
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  // Frobenius norm of the last tangent step
};

/// Karcher mean by fixed-point iteration from the arithmetic mean. When
/// max_iter is exhausted the best iterate is returned with converged = false.
GeometricMean geometric_mean(std::span<const SpdMatrix> mats, double tol = 1e-8, int max_iter = 50);

}  // namespace brakesense
