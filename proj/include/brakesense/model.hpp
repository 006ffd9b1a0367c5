#pragma once

#include "brakesense/cnn.hpp"
#include "brakesense/csp_lda.hpp"
#include "brakesense/rng.hpp"
#include "brakesense/spd.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace brakesense {

enum class ClassifierKind : std::uint8_t { CspLda = 0, Rmdm = 1, Cnn = 2 };

std::string_view to_string(ClassifierKind kind);  // "csp-lda", "rmdm", "cnn"
std::optional<ClassifierKind> parse_classifier_kind(std::string_view text);

struct ClassifierConfig {
  ClassifierKind kind = ClassifierKind::Rmdm;
  double shrinkage = 0.1;
  int csp_pairs = 3;
  double mean_tolerance = 1e-8;
  int mean_max_iter = 50;
  CnnConfig cnn;
  bool strict = false;  // geometric-mean non-convergence becomes a NumericalError

  void validate() const;
};

struct CspLdaModel {
  double shrinkage = 0.1;
  CspFilters csp;
  LdaModel lda;
};

struct RmdmModel {
  double shrinkage = 0.1;
  std::vector<SpdMatrix> class_means;         // index = binary label
  std::vector<Eigen::MatrixXd> mean_invsqrt;  // cached G^-1/2 per class
  bool converged = true;
  int iterations = 0;                         // worst case over classes
  double residual = 0.0;
};

/// Fitted decoder; binary labels 0/1 index the class pair chosen by the caller.
using TrainedModel = std::variant<CspLdaModel, RmdmModel, CnnModel>;

ClassifierKind kind_of(const TrainedModel& model);

RmdmModel rmdm_fit(std::span<const SampleMatrix> windows, std::span<const int> labels, double shrinkage,
                   double tol = 1e-8, int max_iter = 50);

TrainedModel fit_model(const ClassifierConfig& config, std::span<const SampleMatrix> windows,
                       std::span<const int> labels, RngSeed seed);

struct Prediction {
  int label = 0;
  bool tie = false;  // resolved toward label 0
};

Prediction predict(const TrainedModel& model, const WindowRef& window);

// MDL1: "MDL1" u16 version u8 kind, then the kind-specific tensors (f64, little-endian).
std::vector<std::uint8_t> encode_model(const TrainedModel& model);
TrainedModel decode_model(const std::vector<std::uint8_t>& bytes);
void write_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel read_model(const std::filesystem::path& path);

}  // namespace brakesense
