#include "brakesense/model.hpp"

#include "binary.hpp"
#include "brakesense/error.hpp"

#include <cmath>
#include <string>

namespace brakesense {

std::string_view to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::CspLda: return "csp-lda";
    case ClassifierKind::Rmdm: return "rmdm";
    case ClassifierKind::Cnn: return "cnn";
  }
  return "?";
}

std::optional<ClassifierKind> parse_classifier_kind(std::string_view text) {
  for (auto k : {ClassifierKind::CspLda, ClassifierKind::Rmdm, ClassifierKind::Cnn})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

void ClassifierConfig::validate() const {
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw UsageError("shrinkage must lie in [0, 1]");
  if (csp_pairs < 1) throw UsageError("csp_pairs must be >= 1");
  if (!(mean_tolerance > 0.0) || mean_max_iter < 1) throw UsageError("geometric mean tolerance/iterations invalid");
  cnn.validate();
}

ClassifierKind kind_of(const TrainedModel& model) { return static_cast<ClassifierKind>(model.index()); }

namespace {

void check_binary(std::span<const SampleMatrix> windows, std::span<const int> labels, std::size_t min_per_class) {
  if (windows.size() != labels.size()) throw DataError("windows and labels differ in length");
  std::size_t count[2] = {0, 0};
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    ++count[y];
  }
  for (int c = 0; c < 2; ++c)
    if (count[c] < min_per_class)
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(count[c]) + " training epochs, need " +
                      std::to_string(min_per_class));
}

CspLdaModel csp_lda_fit(std::span<const SampleMatrix> windows, std::span<const int> labels, double shrinkage,
                        int pairs) {
  check_binary(windows, labels, 1);
  std::vector<SpdMatrix> covs[2];
  for (std::size_t i = 0; i < windows.size(); ++i)
    covs[labels[i]].push_back(estimate_covariance(windows[i], shrinkage));
  CspLdaModel model;
  model.shrinkage = shrinkage;
  model.csp = csp_fit(covs[0], covs[1], pairs);
  Eigen::MatrixXd features(static_cast<Eigen::Index>(windows.size()), model.csp.filters.rows());
  for (std::size_t i = 0; i < windows.size(); ++i)
    features.row(static_cast<Eigen::Index>(i)) = csp_features(windows[i], model.csp.filters).transpose();
  model.lda = lda_fit(features, labels);
  return model;
}

}  // namespace

RmdmModel rmdm_fit(std::span<const SampleMatrix> windows, std::span<const int> labels, double shrinkage, double tol,
                   int max_iter) {
  check_binary(windows, labels, 2);
  std::vector<SpdMatrix> covs[2];
  for (std::size_t i = 0; i < windows.size(); ++i)
    covs[labels[i]].push_back(estimate_covariance(windows[i], shrinkage));
  RmdmModel model;
  model.shrinkage = shrinkage;
  for (const auto& class_covs : covs) {
    auto gm = geometric_mean(class_covs, tol, max_iter);
    model.converged = model.converged && gm.converged;
    model.iterations = std::max(model.iterations, gm.iterations);
    model.residual = std::max(model.residual, gm.residual);
    model.mean_invsqrt.push_back(spd_invsqrt(gm.mean.matrix()));
    model.class_means.push_back(std::move(gm.mean));
  }
  return model;
}

TrainedModel fit_model(const ClassifierConfig& config, std::span<const SampleMatrix> windows,
                       std::span<const int> labels, RngSeed seed) {
  config.validate();
  switch (config.kind) {
    case ClassifierKind::CspLda:
      return csp_lda_fit(windows, labels, config.shrinkage, config.csp_pairs);
    case ClassifierKind::Rmdm: {
      auto model = rmdm_fit(windows, labels, config.shrinkage, config.mean_tolerance, config.mean_max_iter);
      if (config.strict && !model.converged)
        throw NumericalError("geometric mean did not converge in " + std::to_string(config.mean_max_iter) +
                             " iterations (residual " + std::to_string(model.residual) + ")");
      return model;
    }
    case ClassifierKind::Cnn:
      check_binary(windows, labels, 1);
      return cnn_fit(windows, labels, config.cnn, seed);
  }
  throw UsageError("unknown classifier kind");
}

Prediction predict(const TrainedModel& model, const WindowRef& window) {
  struct Visitor {
    const WindowRef& x;
    Prediction operator()(const CspLdaModel& m) const {
      const auto p = lda_predict(m.lda, csp_features(x, m.csp.filters));
      return {p.label, p.tie};
    }
    Prediction operator()(const RmdmModel& m) const {
      const auto cov = estimate_covariance(x, m.shrinkage);
      const double d0 = riemannian_distance_whitened(m.mean_invsqrt[0], cov);
      const double d1 = riemannian_distance_whitened(m.mean_invsqrt[1], cov);
      return {d1 < d0 ? 1 : 0, d0 == d1};
    }
    Prediction operator()(const CnnModel& m) const {
      const auto p = cnn_predict(m, x);
      return {p.label, p.tie};
    }
  };
  return std::visit(Visitor{window}, model);
}

namespace {

constexpr std::string_view kModelMagic = "MDL1";
constexpr std::uint16_t kModelVersion = 1;

void put_matrix(Writer& w, const Eigen::MatrixXd& m) {
  w.put(static_cast<std::uint32_t>(m.rows()));
  w.put(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) w.put(m(r, c));
}

Eigen::MatrixXd get_matrix(Reader& r, const char* what) {
  const auto rows = r.get<std::uint32_t>(what);
  const auto cols = r.get<std::uint32_t>(what);
  if (std::uint64_t(rows) * cols * 8 > r.remaining())
    throw FormatError(FormatErrc::TruncatedPayload, std::string("file ends inside ") + what);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.get<double>(what);
  return m;
}

void put_vector(Writer& w, const Eigen::VectorXd& v) { put_matrix(w, v); }
Eigen::VectorXd get_vector(Reader& r, const char* what) {
  Eigen::MatrixXd m = get_matrix(r, what);
  if (m.cols() != 1 && m.size() != 0) throw FormatError(FormatErrc::ShapeInconsistency, std::string(what) + " is not a vector");
  return Eigen::Map<Eigen::VectorXd>(m.data(), m.size());
}

void put_cnn_config(Writer& w, const CnnConfig& c) {
  for (int v : {c.f1, c.depth, c.f2, c.kernel_length, c.separable_length, c.pool1, c.pool2, c.epochs, c.batch_size})
    w.put(static_cast<std::int32_t>(v));
  w.put(c.dropout);
  w.put(c.learning_rate);
  w.put(c.momentum);
}

CnnConfig get_cnn_config(Reader& r) {
  CnnConfig c;
  for (int* v : {&c.f1, &c.depth, &c.f2, &c.kernel_length, &c.separable_length, &c.pool1, &c.pool2, &c.epochs,
                 &c.batch_size})
    *v = r.get<std::int32_t>("network config");
  c.dropout = r.get<double>("network config");
  c.learning_rate = r.get<double>("network config");
  c.momentum = r.get<double>("network config");
  return c;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const TrainedModel& model) {
  Writer w;
  w.put_raw(kModelMagic);
  w.put(kModelVersion);
  w.put(static_cast<std::uint8_t>(kind_of(model)));
  if (const auto* m = std::get_if<CspLdaModel>(&model)) {
    w.put(m->shrinkage);
    put_matrix(w, m->csp.filters);
    put_vector(w, m->csp.eigenvalues);
    w.put(static_cast<std::uint8_t>(m->csp.ridge_applied));
    put_vector(w, m->lda.w);
    w.put(m->lda.b);
  } else if (const auto* m = std::get_if<RmdmModel>(&model)) {
    w.put(m->shrinkage);
    w.put(static_cast<std::uint32_t>(m->class_means.size()));
    for (const auto& g : m->class_means) put_matrix(w, g.matrix());
    w.put(static_cast<std::uint8_t>(m->converged));
    w.put(static_cast<std::int32_t>(m->iterations));
    w.put(m->residual);
  } else {
    const auto& cnn = std::get<CnnModel>(model);
    put_cnn_config(w, cnn.network.config());
    w.put(static_cast<std::uint32_t>(cnn.network.channels()));
    w.put(static_cast<std::uint32_t>(cnn.network.samples()));
    put_vector(w, cnn.network.parameters());
    put_vector(w, Eigen::Map<const Eigen::VectorXd>(cnn.epoch_loss.data(), Eigen::Index(cnn.epoch_loss.size())));
  }
  return w.take();
}

TrainedModel decode_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.remaining() < kModelMagic.size() || r.get_raw(kModelMagic.size(), "magic") != kModelMagic)
    throw FormatError(FormatErrc::BadMagic, "expected 'MDL1'");
  const auto version = r.get<std::uint16_t>("header");
  if (version != kModelVersion)
    throw FormatError(FormatErrc::VersionMismatch, "model version " + std::to_string(version));
  const auto kind = r.get<std::uint8_t>("header");
  TrainedModel out;
  switch (kind) {
    case 0: {
      CspLdaModel m;
      m.shrinkage = r.get<double>("shrinkage");
      m.csp.filters = get_matrix(r, "spatial filters");
      m.csp.eigenvalues = get_vector(r, "eigenvalues");
      m.csp.ridge_applied = r.get<std::uint8_t>("ridge flag") != 0;
      m.lda.w = get_vector(r, "discriminant");
      m.lda.b = r.get<double>("bias");
      if (m.csp.eigenvalues.size() != m.csp.filters.rows() || m.lda.w.size() != m.csp.filters.rows())
        throw FormatError(FormatErrc::ShapeInconsistency, "CSP/LDA tensor sizes disagree");
      out = std::move(m);
      break;
    }
    case 1: {
      RmdmModel m;
      m.shrinkage = r.get<double>("shrinkage");
      const auto classes = r.get<std::uint32_t>("class count");
      if (classes != 2) throw FormatError(FormatErrc::ShapeInconsistency, "RMDM model must hold two class means");
      for (std::uint32_t c = 0; c < classes; ++c) {
        Eigen::MatrixXd g = get_matrix(r, "class mean");
        try {
          m.class_means.emplace_back(std::move(g));
        } catch (const NumericalError& e) {
          throw FormatError(FormatErrc::ShapeInconsistency, e.what());
        }
        m.mean_invsqrt.push_back(spd_invsqrt(m.class_means.back().matrix()));
      }
      if (m.class_means[0].dim() != m.class_means[1].dim())
        throw FormatError(FormatErrc::ShapeInconsistency, "class means differ in size");
      m.converged = r.get<std::uint8_t>("convergence flag") != 0;
      m.iterations = r.get<std::int32_t>("iterations");
      m.residual = r.get<double>("residual");
      out = std::move(m);
      break;
    }
    case 2: {
      const CnnConfig config = get_cnn_config(r);
      const auto channels = r.get<std::uint32_t>("input shape");
      const auto samples = r.get<std::uint32_t>("input shape");
      CnnModel m{CnnNetwork(config, channels, samples), {}};
      Eigen::VectorXd theta = get_vector(r, "network parameters");
      if (theta.size() != m.network.num_parameters())
        throw FormatError(FormatErrc::ShapeInconsistency, "network parameter count does not match its config");
      m.network.parameters() = std::move(theta);
      const Eigen::VectorXd loss = get_vector(r, "training loss");
      m.epoch_loss.assign(loss.data(), loss.data() + loss.size());
      out = std::move(m);
      break;
    }
    default:
      throw FormatError(FormatErrc::ShapeInconsistency, "unknown model kind " + std::to_string(kind));
  }
  if (r.remaining() != 0) throw FormatError(FormatErrc::ShapeInconsistency, "trailing bytes after model");
  return out;
}

void write_model(const TrainedModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(model));
}

TrainedModel read_model(const std::filesystem::path& path) { return decode_model(read_file(path)); }

}  // namespace brakesense
