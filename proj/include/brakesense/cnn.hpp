#pragma once

#include "brakesense/rng.hpp"
#include "brakesense/spd.hpp"

#include <Eigen/Core>

#include <span>
#include <vector>

namespace brakesense {

// Compact EEG network: spatial depthwise filters, per-group temporal kernels,
// ELU/avg-pool/dropout, separable (depthwise + pointwise) convolution, then a
// dense softmax over two classes. No batch normalization; conv biases instead.
struct CnnConfig {
  int f1 = 8;                 // temporal kernels
  int depth = 2;              // spatial filters per temporal kernel
  int f2 = 16;                // pointwise filters
  int kernel_length = 100;    // sample_rate / 2
  int separable_length = 16;
  int pool1 = 4;
  int pool2 = 8;
  double dropout = 0.25;
  int epochs = 100;
  int batch_size = 16;
  double learning_rate = 1e-2;
  double momentum = 0.9;

  void validate() const;
  friend bool operator==(const CnnConfig&, const CnnConfig&) = default;
};

class CnnNetwork {
 public:
  CnnNetwork(const CnnConfig& config, Eigen::Index channels, Eigen::Index samples);

  /// Glorot-uniform weights, zero biases.
  void initialize(RngSeed seed);

  const CnnConfig& config() const { return config_; }
  Eigen::Index channels() const { return channels_; }
  Eigen::Index samples() const { return samples_; }
  Eigen::Index num_parameters() const { return theta_.size(); }
  Eigen::VectorXd& parameters() { return theta_; }
  const Eigen::VectorXd& parameters() const { return theta_; }

  /// Names and [offset, size) of each parameter tensor.
  struct Tensor {
    const char* name;
    Eigen::Index offset;
    Eigen::Index size;
  };
  std::vector<Tensor> tensors() const;

  /// Class probabilities for one (already normalized) input, inference mode.
  Eigen::Vector2d forward(const WindowRef& x) const;

  /// Mean cross-entropy of the batch; writes its gradient into `grad`.
  /// With a non-null engine, dropout masks are drawn from it.
  double loss_and_gradient(std::span<const SampleMatrix> xs, std::span<const int> labels, Eigen::VectorXd& grad,
                           Engine* dropout_engine) const;

 private:
  struct Layout;
  struct Pass;
  double run(const WindowRef& x, int label, Pass& pass, Eigen::VectorXd* grad, Engine* dropout_engine) const;

  CnnConfig config_;
  Eigen::Index channels_;
  Eigen::Index samples_;
  Eigen::VectorXd theta_;
};

/// Per-epoch, per-channel standardization applied to every network input.
SampleMatrix standardize_channels(const WindowRef& window);

struct CnnModel {
  CnnNetwork network;
  std::vector<double> epoch_loss;  // mean training loss per epoch
};

/// Mini-batch SGD with momentum on cross-entropy; labels are 0/1.
CnnModel cnn_fit(std::span<const SampleMatrix> windows, std::span<const int> labels, const CnnConfig& config,
                 RngSeed seed);

struct CnnPrediction {
  int label = 0;
  Eigen::Vector2d probabilities = Eigen::Vector2d::Constant(0.5);
  bool tie = false;
};

CnnPrediction cnn_predict(const CnnModel& model, const WindowRef& window);

}  // namespace brakesense
