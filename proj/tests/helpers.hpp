#pragma once

#include "brakesense/spd.hpp"
#include "brakesense/types.hpp"

#include <Eigen/Dense>

#include <random>

namespace testing {

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Well-conditioned random SPD: X X^T / d + 0.5 I.
inline Eigen::MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index d) {
  const Eigen::MatrixXd x = random_matrix(rng, d, 2 * d);
  Eigen::MatrixXd s = x * x.transpose() / static_cast<double>(d) + 0.5 * Eigen::MatrixXd::Identity(d, d);
  return 0.5 * (s + s.transpose());
}

// Independent oracle for symmetric matrix functions via a plain eigen solve.
template <class F>
Eigen::MatrixXd eig_fn(const Eigen::MatrixXd& m, F f) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd v = es.eigenvalues();
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f(v(i));
  return es.eigenvectors() * v.asDiagonal() * es.eigenvectors().transpose();
}

inline brakesense::SampleMatrix float_samples(std::mt19937_64& rng, Eigen::Index c, Eigen::Index t, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  brakesense::SampleMatrix m(c, t);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(n(rng));
  return m;
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace testing
