#include "brakesense/csp_lda.hpp"

#include "brakesense/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace brakesense {

namespace {

Eigen::MatrixXd average(std::span<const SpdMatrix> mats) {
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(mats.front().dim(), mats.front().dim());
  for (const auto& m : mats) {
    if (m.dim() != sum.rows()) throw DataError("CSP covariances of different size");
    sum += m.matrix();
  }
  return sum / static_cast<double>(mats.size());
}

}  // namespace

CspFilters csp_fit(std::span<const SpdMatrix> class_a, std::span<const SpdMatrix> class_b, int k_pairs) {
  if (class_a.empty() || class_b.empty()) throw DataError("CSP needs covariances of both classes");
  const Eigen::MatrixXd sa = average(class_a);
  const Eigen::MatrixXd sb = average(class_b);
  if (sa.rows() != sb.rows()) throw DataError("CSP class covariances differ in size");
  const auto c = sa.rows();
  if (k_pairs < 1 || 2 * k_pairs > c) throw UsageError("CSP needs 1 <= k_pairs <= C/2");

  CspFilters out;
  Eigen::MatrixXd composite = sa + sb;
  if (Eigen::LLT<Eigen::MatrixXd>(composite).info() != Eigen::Success) {
    composite.diagonal().array() += 1e-8;
    out.ridge_applied = true;
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(sa, composite);
  if (es.info() != Eigen::Success) throw NumericalError("CSP generalized eigenproblem failed");

  // Eigenvalues ascend: the first k and the last k are the discriminative ends.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < k_pairs; ++i) {
    keep.push_back(i);
    keep.push_back(c - 1 - i);
  }
  const Eigen::VectorXd& lambda = es.eigenvalues();
  std::stable_sort(keep.begin(), keep.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(lambda[a] - 0.5) > std::abs(lambda[b] - 0.5);
  });
  out.filters.resize(static_cast<Eigen::Index>(keep.size()), c);
  out.eigenvalues.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t r = 0; r < keep.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    out.filters.row(row) = es.eigenvectors().col(keep[r]).transpose();
    out.eigenvalues[row] = lambda[keep[r]];
  }
  return out;
}

Eigen::VectorXd csp_features(const WindowRef& window, const Eigen::MatrixXd& filters) {
  if (filters.cols() != window.rows()) throw DataError("CSP filter width does not match channel count");
  if (window.cols() < 2) throw DataError("CSP features need at least two samples");
  Eigen::MatrixXd projected = filters * window;
  projected = projected.colwise() - projected.rowwise().mean();
  const Eigen::VectorXd var = projected.rowwise().squaredNorm() / static_cast<double>(window.cols() - 1);
  const double total = var.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("CSP projections have zero total variance");
  Eigen::VectorXd f = (var / total).array().log();
  if (!f.allFinite()) throw NumericalError("CSP feature is not finite");
  return f;
}

LdaModel lda_fit(const Eigen::MatrixXd& features, std::span<const int> labels) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size())) throw DataError("LDA features/labels mismatch");
  const auto d = features.cols();
  Eigen::VectorXd mean[2] = {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("LDA labels must be 0 or 1");
    mean[labels[i]] += features.row(static_cast<Eigen::Index>(i)).transpose();
    ++count[labels[i]];
  }
  if (count[0] == 0 || count[1] == 0) throw DataError("LDA needs samples of both classes");
  mean[0] /= static_cast<double>(count[0]);
  mean[1] /= static_cast<double>(count[1]);

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Eigen::VectorXd dev = features.row(static_cast<Eigen::Index>(i)).transpose() - mean[labels[i]];
    scatter.noalias() += dev * dev.transpose();
  }
  const auto dof = std::max<std::size_t>(1, labels.size() > 2 ? labels.size() - 2 : 1);
  scatter /= static_cast<double>(dof);
  scatter.diagonal().array() += 1e-6;

  LdaModel model;
  model.w = scatter.ldlt().solve(mean[1] - mean[0]);
  model.b = -0.5 * model.w.dot(mean[0] + mean[1]);
  if (!model.w.allFinite() || !std::isfinite(model.b)) throw NumericalError("LDA solution is not finite");
  return model;
}

LdaPrediction lda_predict(const LdaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.w.size()) throw DataError("LDA feature dimension mismatch");
  LdaPrediction p;
  p.score = model.w.dot(x) + model.b;
  p.label = p.score > 0.0 ? 1 : 0;
  p.tie = p.score == 0.0;
  return p;
}

}  // namespace brakesense
