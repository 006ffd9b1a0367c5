#pragma once

#include "brakesense/spd.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace brakesense {

struct CspFilters {
  Eigen::MatrixXd filters;      // m x C, one filter per row
  Eigen::VectorXd eigenvalues;  // generalized eigenvalue of each row
  bool ridge_applied = false;   // 1e-8 ridge added to a singular composite covariance
};

/// Solves Sa v = l (Sa + Sb) v on the class-averaged covariances and keeps
/// k_pairs filters from each end of the spectrum, ordered by |l - 0.5| descending.
CspFilters csp_fit(std::span<const SpdMatrix> class_a, std::span<const SpdMatrix> class_b, int k_pairs);

/// Normalized log-variance: log(var_i / sum_j var_j).
Eigen::VectorXd csp_features(const WindowRef& window, const Eigen::MatrixXd& filters);

struct LdaModel {
  Eigen::VectorXd w;
  double b = 0.0;
};

struct LdaPrediction {
  int label = 0;  // 0 or 1
  double score = 0.0;
  bool tie = false;
};

/// Rows of `features` are samples; labels are 0/1. Pooled within-class
/// covariance gets a 1e-6 ridge.
LdaModel lda_fit(const Eigen::MatrixXd& features, std::span<const int> labels);
/// Label 1 when w.x + b > 0; an exact zero score is a tie resolved to 0.
LdaPrediction lda_predict(const LdaModel& model, const Eigen::VectorXd& x);

}  // namespace brakesense
