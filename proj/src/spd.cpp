#include "brakesense/spd.hpp"

#include "brakesense/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

namespace brakesense {

SpdMatrix::SpdMatrix(Eigen::MatrixXd m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw NumericalError("SPD matrix must be square and nonempty");
  if (!m.allFinite()) throw NumericalError("SPD matrix has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw NumericalError("matrix is not symmetric");
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0))
    throw NumericalError("matrix is not positive definite");
  m_ = std::move(m);
}

SpdMatrix SpdMatrix::trusted(Eigen::MatrixXd m) {
  Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  return SpdMatrix(std::move(sym), Unchecked{});
}

SpdMatrix estimate_covariance(const WindowRef& window, double shrinkage) {
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw UsageError("shrinkage must lie in [0, 1]");
  if (window.cols() < 2) throw DataError("covariance needs at least two samples");
  if (!window.allFinite()) throw DataError("covariance input has non-finite samples");
  const Eigen::MatrixXd centered = window.colwise() - window.rowwise().mean();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(window.rows(), window.rows());
  s.selfadjointView<Eigen::Lower>().rankUpdate(centered, 1.0 / static_cast<double>(window.cols() - 1));
  s.triangularView<Eigen::StrictlyUpper>() = s.transpose();
  if (shrinkage > 0.0) {
    const double mu = s.trace() / static_cast<double>(s.rows());
    s *= 1.0 - shrinkage;
    s.diagonal().array() += shrinkage * mu;
  }
  return SpdMatrix::trusted(std::move(s));
}

Eigen::MatrixXd symmetric_function(const Eigen::MatrixXd& m, const std::function<double(double)>& f) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) throw NumericalError("eigendecomposition failed");
  const Eigen::VectorXd d = es.eigenvalues().unaryExpr(f);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd spd_sqrt(const Eigen::MatrixXd& m) {
  return symmetric_function(m, [](double x) { return std::sqrt(x); });
}
Eigen::MatrixXd spd_invsqrt(const Eigen::MatrixXd& m) {
  return symmetric_function(m, [](double x) { return 1.0 / std::sqrt(x); });
}
Eigen::MatrixXd spd_log(const Eigen::MatrixXd& m) {
  return symmetric_function(m, [](double x) { return std::log(x); });
}
Eigen::MatrixXd spd_exp(const Eigen::MatrixXd& m) {
  return symmetric_function(m, [](double x) { return std::exp(x); });
}

namespace {

double log_norm(const Eigen::VectorXd& eigenvalues) {
  if (!(eigenvalues.minCoeff() > 0.0)) throw NumericalError("distance between non-SPD matrices");
  return std::sqrt(eigenvalues.array().log().square().sum());
}

}  // namespace

double riemannian_distance(const SpdMatrix& a, const SpdMatrix& b) {
  if (a.dim() != b.dim()) throw DataError("distance between matrices of different size");
  // Eigenvalues of A^-1 B via the generalized problem B v = l A v.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(b.matrix(), a.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("generalized eigensolver failed");
  return log_norm(es.eigenvalues());
}

double riemannian_distance_whitened(const Eigen::MatrixXd& a_invsqrt, const SpdMatrix& b) {
  Eigen::MatrixXd m = a_invsqrt * b.matrix() * a_invsqrt;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
  return log_norm(es.eigenvalues());
}

GeometricMean geometric_mean(std::span<const SpdMatrix> mats, double tol, int max_iter) {
  if (mats.empty()) throw DataError("geometric mean of an empty list");
  const auto n = mats.front().dim();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (const auto& m : mats) {
    if (m.dim() != n) throw DataError("geometric mean of matrices of different size");
    g += m.matrix();
  }
  g /= static_cast<double>(mats.size());

  Eigen::MatrixXd best = g;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    if (es.info() != Eigen::Success || !(es.eigenvalues().minCoeff() > 0.0))
      throw NumericalError("geometric mean iterate lost positive definiteness");
    const Eigen::VectorXd root = es.eigenvalues().cwiseSqrt();
    const Eigen::MatrixXd g_sqrt = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    const Eigen::MatrixXd g_isqrt = es.eigenvectors() * root.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();

    Eigen::MatrixXd step = Eigen::MatrixXd::Zero(n, n);
    for (const auto& m : mats) step += spd_log(g_isqrt * m.matrix() * g_isqrt);
    step /= static_cast<double>(mats.size());
    const double residual = step.norm();

    // The step at the current iterate is cheap to apply, so the returned mean
    // is one update past the point where the residual was measured.
    g = g_sqrt * spd_exp(step) * g_sqrt;
    g = 0.5 * (g + g.transpose());
    if (residual < best_residual) {
      best_residual = residual;
      best = g;
    }
    if (residual <= tol) return {SpdMatrix::trusted(g), true, it, residual};
  }
  return {SpdMatrix::trusted(best), false, max_iter, best_residual};
}

}  // namespace brakesense
