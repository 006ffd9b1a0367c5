#include "brakesense/cnn.hpp"

#include "brakesense/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace brakesense {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void CnnConfig::validate() const {
  if (f1 < 1 || depth < 1 || f2 < 1) throw UsageError("CNN filter counts must be positive");
  if (kernel_length < 1 || separable_length < 1) throw UsageError("CNN kernel lengths must be positive");
  if (pool1 < 1 || pool2 < 1) throw UsageError("CNN pooling sizes must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("CNN dropout must lie in [0, 1)");
  if (epochs < 0 || batch_size < 1) throw UsageError("CNN epochs must be >= 0 and batch_size >= 1");
  if (!(learning_rate > 0.0) || !(momentum >= 0.0 && momentum < 1.0))
    throw UsageError("CNN learning_rate must be > 0 and momentum in [0, 1)");
}

struct CnnNetwork::Layout {
  Eigen::Index c, t, m, f1, d, k, s, f2, t1, t2, flat;
  Eigen::Index spatial, temporal, b1, depthwise, pointwise, b2, dense, b3, total;

  Layout(const CnnConfig& cfg, Eigen::Index channels, Eigen::Index samples)
      : c(channels), t(samples), m(cfg.f1 * cfg.depth), f1(cfg.f1), d(cfg.depth), k(cfg.kernel_length),
        s(cfg.separable_length), f2(cfg.f2), t1(samples / cfg.pool1), t2(t1 / cfg.pool2), flat(f2 * t2) {
    spatial = 0;
    temporal = spatial + m * c;
    b1 = temporal + f1 * k;
    depthwise = b1 + m;
    pointwise = depthwise + m * s;
    b2 = pointwise + f2 * m;
    dense = b2 + f2;
    b3 = dense + 2 * flat;
    total = b3 + 2;
  }
};

struct CnnNetwork::Pass {
  RowMat z1p, z2, a2, p2, mask2, d2p, z3, z4, a4, p4, mask4, d4;
  Eigen::Vector2d probs;
  // backward scratch
  RowMat dz1p, dz2, dd2p, dz3, dz4;
};

CnnNetwork::CnnNetwork(const CnnConfig& config, Eigen::Index channels, Eigen::Index samples)
    : config_(config), channels_(channels), samples_(samples) {
  config_.validate();
  if (channels < 1) throw UsageError("CNN needs at least one channel");
  const Layout l(config_, channels, samples);
  if (l.t2 < 1)
    throw UsageError("CNN input of " + std::to_string(samples) + " samples is too short for pooling " +
                     std::to_string(config_.pool1) + "x" + std::to_string(config_.pool2));
  theta_ = Eigen::VectorXd::Zero(l.total);
}

std::vector<CnnNetwork::Tensor> CnnNetwork::tensors() const {
  const Layout l(config_, channels_, samples_);
  return {{"spatial", l.spatial, l.m * l.c},     {"temporal", l.temporal, l.f1 * l.k},
          {"bias1", l.b1, l.m},                  {"depthwise", l.depthwise, l.m * l.s},
          {"pointwise", l.pointwise, l.f2 * l.m}, {"bias2", l.b2, l.f2},
          {"dense", l.dense, 2 * l.flat},        {"bias3", l.b3, 2}};
}

void CnnNetwork::initialize(RngSeed seed) {
  const Layout l(config_, channels_, samples_);
  auto engine = make_engine(seed);
  const auto glorot = [&](Eigen::Index offset, Eigen::Index size, double fan_in, double fan_out) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (Eigen::Index i = 0; i < size; ++i) theta_[offset + i] = limit * u(engine);
  };
  theta_.setZero();
  glorot(l.spatial, l.m * l.c, double(l.c), double(l.c * l.d));
  glorot(l.temporal, l.f1 * l.k, double(l.k), double(l.k * l.f1));
  glorot(l.depthwise, l.m * l.s, double(l.s), double(l.s));
  glorot(l.pointwise, l.f2 * l.m, double(l.m), double(l.f2));
  glorot(l.dense, 2 * l.flat, double(l.flat), 2.0);
}

namespace {

inline double elu(double z) { return z > 0.0 ? z : std::expm1(z); }

void average_pool(const RowMat& in, Eigen::Index pool, Eigen::Index out_len, RowMat& out) {
  out.resize(in.rows(), out_len);
  for (Eigen::Index r = 0; r < in.rows(); ++r)
    for (Eigen::Index u = 0; u < out_len; ++u) out(r, u) = in.row(r).segment(u * pool, pool).mean();
}

void draw_mask(Eigen::Index rows, Eigen::Index cols, double rate, Engine* engine, RowMat& mask) {
  mask.resize(rows, cols);
  if (!engine || rate == 0.0) {
    mask.setOnes();
    return;
  }
  std::bernoulli_distribution keep(1.0 - rate);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(*engine) ? scale : 0.0;
}

}  // namespace

double CnnNetwork::run(const WindowRef& x, int label, Pass& p, Eigen::VectorXd* grad, Engine* dropout_engine) const {
  const Layout l(config_, channels_, samples_);
  if (x.rows() != l.c || x.cols() != l.t)
    throw DataError("CNN input is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + ", expected " +
                    std::to_string(l.c) + "x" + std::to_string(l.t));
  const double* th = theta_.data();
  const ConstRowMap w_sp(th + l.spatial, l.m, l.c);
  const ConstRowMap w_t(th + l.temporal, l.f1, l.k);
  const Eigen::Map<const Eigen::VectorXd> b1(th + l.b1, l.m);
  const ConstRowMap w_dw(th + l.depthwise, l.m, l.s);
  const ConstRowMap w_pw(th + l.pointwise, l.f2, l.m);
  const Eigen::Map<const Eigen::VectorXd> b2(th + l.b2, l.f2);
  const ConstRowMap w_d(th + l.dense, 2, l.flat);
  const Eigen::Map<const Eigen::VectorXd> b3(th + l.b3, 2);

  // Spatial filters first, then each map is convolved with its group's temporal kernel ('same' padding).
  const Eigen::Index pad = (l.k - 1) / 2;
  p.z1p.setZero(l.m, l.t + l.k - 1);
  p.z1p.middleCols(pad, l.t).noalias() = w_sp * x;
  p.z2.resize(l.m, l.t);
  for (Eigen::Index m = 0; m < l.m; ++m) {
    const auto kernel = w_t.row(m / l.d);
    for (Eigen::Index t = 0; t < l.t; ++t) p.z2(m, t) = kernel.dot(p.z1p.row(m).segment(t, l.k)) + b1[m];
  }
  p.a2 = p.z2.unaryExpr(&elu);
  average_pool(p.a2, config_.pool1, l.t1, p.p2);
  draw_mask(l.m, l.t1, config_.dropout, dropout_engine, p.mask2);

  const Eigen::Index pad2 = (l.s - 1) / 2;
  p.d2p.setZero(l.m, l.t1 + l.s - 1);
  p.d2p.middleCols(pad2, l.t1) = p.p2.cwiseProduct(p.mask2);
  p.z3.resize(l.m, l.t1);
  for (Eigen::Index m = 0; m < l.m; ++m)
    for (Eigen::Index u = 0; u < l.t1; ++u) p.z3(m, u) = w_dw.row(m).dot(p.d2p.row(m).segment(u, l.s));
  p.z4.noalias() = w_pw * p.z3;
  p.z4.colwise() += b2;
  p.a4 = p.z4.unaryExpr(&elu);
  average_pool(p.a4, config_.pool2, l.t2, p.p4);
  draw_mask(l.f2, l.t2, config_.dropout, dropout_engine, p.mask4);
  p.d4 = p.p4.cwiseProduct(p.mask4);

  const Eigen::Map<const Eigen::VectorXd> flat(p.d4.data(), l.flat);
  Eigen::Vector2d logits = w_d * flat + b3;
  logits.array() -= logits.maxCoeff();
  p.probs = logits.array().exp();
  p.probs /= p.probs.sum();
  if (label < 0) return 0.0;
  const double loss = -std::log(std::max(p.probs[label], 1e-300));
  if (!grad) return loss;

  double* g = grad->data();
  RowMap g_sp(g + l.spatial, l.m, l.c);
  RowMap g_t(g + l.temporal, l.f1, l.k);
  Eigen::Map<Eigen::VectorXd> g_b1(g + l.b1, l.m);
  RowMap g_dw(g + l.depthwise, l.m, l.s);
  RowMap g_pw(g + l.pointwise, l.f2, l.m);
  Eigen::Map<Eigen::VectorXd> g_b2(g + l.b2, l.f2);
  RowMap g_d(g + l.dense, 2, l.flat);
  Eigen::Map<Eigen::VectorXd> g_b3(g + l.b3, 2);

  Eigen::Vector2d dlogits = p.probs;
  dlogits[label] -= 1.0;
  g_d.noalias() += dlogits * flat.transpose();
  g_b3 += dlogits;
  const Eigen::VectorXd dflat = w_d.transpose() * dlogits;

  p.dz4.setZero(l.f2, l.t1);
  for (Eigen::Index r = 0; r < l.f2; ++r)
    for (Eigen::Index v = 0; v < l.t2; ++v) {
      const double share = dflat[r * l.t2 + v] * p.mask4(r, v) / config_.pool2;
      for (Eigen::Index j = 0; j < config_.pool2; ++j) {
        const Eigen::Index u = v * config_.pool2 + j;
        p.dz4(r, u) = share * (p.z4(r, u) > 0.0 ? 1.0 : p.a4(r, u) + 1.0);
      }
    }
  g_pw.noalias() += p.dz4 * p.z3.transpose();
  g_b2 += p.dz4.rowwise().sum();
  p.dz3.noalias() = w_pw.transpose() * p.dz4;

  p.dd2p.setZero(l.m, l.t1 + l.s - 1);
  for (Eigen::Index m = 0; m < l.m; ++m) {
    for (Eigen::Index k = 0; k < l.s; ++k) g_dw(m, k) += p.dz3.row(m).dot(p.d2p.row(m).segment(k, l.t1));
    for (Eigen::Index u = 0; u < l.t1; ++u) p.dd2p.row(m).segment(u, l.s) += p.dz3(m, u) * w_dw.row(m);
  }

  p.dz2.setZero(l.m, l.t);
  for (Eigen::Index m = 0; m < l.m; ++m)
    for (Eigen::Index u = 0; u < l.t1; ++u) {
      const double share = p.dd2p(m, pad2 + u) * p.mask2(m, u) / config_.pool1;
      for (Eigen::Index j = 0; j < config_.pool1; ++j) {
        const Eigen::Index t = u * config_.pool1 + j;
        p.dz2(m, t) = share * (p.z2(m, t) > 0.0 ? 1.0 : p.a2(m, t) + 1.0);
      }
    }
  g_b1 += p.dz2.rowwise().sum();

  p.dz1p.setZero(l.m, l.t + l.k - 1);
  for (Eigen::Index m = 0; m < l.m; ++m) {
    const auto kernel = w_t.row(m / l.d);
    auto g_kernel = g_t.row(m / l.d);
    for (Eigen::Index k = 0; k < l.k; ++k) g_kernel[k] += p.dz2.row(m).dot(p.z1p.row(m).segment(k, l.t));
    for (Eigen::Index t = 0; t < l.t; ++t) p.dz1p.row(m).segment(t, l.k) += p.dz2(m, t) * kernel;
  }
  g_sp.noalias() += p.dz1p.middleCols(pad, l.t) * x.transpose();
  return loss;
}

Eigen::Vector2d CnnNetwork::forward(const WindowRef& x) const {
  Pass pass;
  run(x, -1, pass, nullptr, nullptr);
  return pass.probs;
}

double CnnNetwork::loss_and_gradient(std::span<const SampleMatrix> xs, std::span<const int> labels,
                                     Eigen::VectorXd& grad, Engine* dropout_engine) const {
  if (xs.empty() || xs.size() != labels.size()) throw DataError("CNN batch is empty or mislabeled");
  grad.setZero(theta_.size());
  Pass pass;
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("CNN labels must be 0 or 1");
    loss += run(xs[i], labels[i], pass, &grad, dropout_engine);
  }
  const double inv = 1.0 / static_cast<double>(xs.size());
  grad *= inv;
  return loss * inv;
}

SampleMatrix standardize_channels(const WindowRef& window) {
  SampleMatrix out = window.colwise() - window.rowwise().mean();
  if (out.cols() < 2) return out;
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double sd = std::sqrt(out.row(r).squaredNorm() / static_cast<double>(out.cols() - 1));
    if (sd > 0.0) out.row(r) /= sd;
  }
  return out;
}

CnnModel cnn_fit(std::span<const SampleMatrix> windows, std::span<const int> labels, const CnnConfig& config,
                 RngSeed seed) {
  config.validate();
  if (windows.empty() || windows.size() != labels.size()) throw DataError("CNN training set is empty or mislabeled");
  const auto channels = windows.front().rows();
  const auto samples = windows.front().cols();
  bool seen[2] = {false, false};
  std::vector<SampleMatrix> inputs;
  inputs.reserve(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].rows() != channels || windows[i].cols() != samples) throw DataError("CNN inputs differ in shape");
    if (labels[i] != 0 && labels[i] != 1) throw DataError("CNN labels must be 0 or 1");
    seen[labels[i]] = true;
    inputs.push_back(standardize_channels(windows[i]));
  }
  if (!seen[0] || !seen[1]) throw DataError("CNN training needs both classes");

  CnnModel model{CnnNetwork(config, channels, samples), {}};
  CnnNetwork& net = model.network;
  net.initialize(split_rng(seed, 0));
  auto order_engine = make_engine(split_rng(seed, 1));
  auto dropout_engine = make_engine(split_rng(seed, 2));

  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(net.num_parameters());
  Eigen::VectorXd grad(net.num_parameters());
  std::vector<SampleMatrix> batch_x;
  std::vector<int> batch_y;
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_engine);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto stop = std::min(order.size(), start + batch);
      batch_x.clear();
      batch_y.clear();
      for (auto i = start; i < stop; ++i) {
        batch_x.push_back(inputs[order[i]]);
        batch_y.push_back(labels[order[i]]);
      }
      const double loss = net.loss_and_gradient(batch_x, batch_y, grad, &dropout_engine);
      if (!std::isfinite(loss) || !grad.allFinite())
        throw NumericalError("CNN training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                             ", batch starting at " + std::to_string(start) + " (learning rate " +
                             std::to_string(config.learning_rate) + ")");
      velocity = config.momentum * velocity - config.learning_rate * grad;
      net.parameters() += velocity;
      epoch_loss += loss * static_cast<double>(stop - start);
    }
    model.epoch_loss.push_back(epoch_loss / static_cast<double>(order.size()));
  }
  return model;
}

CnnPrediction cnn_predict(const CnnModel& model, const WindowRef& window) {
  CnnPrediction out;
  out.probabilities = model.network.forward(standardize_channels(window));
  out.tie = out.probabilities[0] == out.probabilities[1];
  out.label = out.probabilities[1] > out.probabilities[0] ? 1 : 0;
  return out;
}

}  // namespace brakesense
