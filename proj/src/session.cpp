#include "brakesense/error.hpp"
#include "brakesense/synth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <utility>

namespace brakesense {

std::string_view to_string(DrivingMode mode) {
  return mode == DrivingMode::Emergency ? "emergency" : "normal";
}

void ScenarioConfig::validate() const {
  if (!(session_minutes > 0.0)) throw UsageError("session_minutes must be positive");
  if (!(inter_event_s.lo > 0.0 && inter_event_s.lo <= inter_event_s.hi))
    throw UsageError("inter_event_s must be a nonempty positive range");
  if (!(gap_m.lo > 0.0 && gap_m.lo <= gap_m.hi)) throw UsageError("gap_m must be a nonempty positive range");
  if (!(lead_speed_kmh > 0.0)) throw UsageError("lead_speed_kmh must be positive");
}

void ErpTemplateConfig::validate() const {
  if (!(amplitude_scale >= 0.0) || !std::isfinite(amplitude_scale))
    throw UsageError("amplitude_scale must be finite and >= 0");
  const auto ordered = [](double a, double b, double c, const char* name) {
    if (!(a < b && b < c)) throw UsageError(std::string(name) + " onset < peak < offset violated");
  };
  ordered(occipital_onset_ms, occipital_peak_ms, occipital_offset_ms, "occipital");
  ordered(motor_onset_ms, motor_peak_ms, motor_offset_ms, "motor");
  if (!(normal_onset_ms < normal_offset_ms)) throw UsageError("normal negativity onset must precede offset");
}

void NoiseConfig::validate() const {
  if (!(rms_uv > 0.0)) throw UsageError("noise rms_uv must be positive");
  if (!(spatial_decay >= 1.0)) throw UsageError("spatial_decay below 1 makes the mixing numerically singular");
  if (!(sensor_noise_uv >= 0.0)) throw UsageError("sensor_noise_uv must be >= 0");
  if (!(blink_rate_per_min >= 0.0) || !(blink_amplitude_uv >= 0.0))
    throw UsageError("blink rate and amplitude must be >= 0");
  if (!(outlier_probability >= 0.0 && outlier_probability < 1.0))
    throw UsageError("outlier_probability must lie in [0, 1)");
  if (!(outlier_amplitude_uv >= 0.0)) throw UsageError("outlier_amplitude_uv must be >= 0");
}

namespace {

constexpr double kOutlierWindowMs = 4000.0;
constexpr double kBlinkWidthMs = 300.0;
constexpr double kOutlierWidthMs = 100.0;
constexpr int kPinkRows = 16;

using Weights = std::array<std::pair<std::string_view, double>, 8>;

constexpr Weights kOccipitalWeights{{{"Oz", 1.0}, {"O1", 0.8}, {"O2", 0.8}, {"Pz", 0.35},
                                     {"P3", 0.25}, {"P4", 0.25}, {"P5", 0.2}, {"P6", 0.2}}};
constexpr Weights kCentralWeights{{{"Cz", 1.0}, {"C3", 0.7}, {"C4", 0.7}, {"FC1", 0.5},
                                   {"FC2", 0.5}, {"CP1", 0.5}, {"CP2", 0.5}, {"", 0.0}}};

double weight(const Weights& table, std::string_view channel) {
  for (const auto& [name, w] : table)
    if (!name.empty() && name == channel) return w;
  return 0.0;
}

// Raised cosine rising from onset to a unit peak and decaying to zero at offset.
double bump(double t, double onset, double peak, double offset) {
  if (t <= onset || t >= offset) return 0.0;
  const double x = t < peak ? (t - peak) / (peak - onset) : (t - peak) / (offset - peak);
  return 0.5 * (1.0 + std::cos(std::numbers::pi * x));
}

double occipital(const ErpTemplateConfig& e, double t) {
  return e.occipital_peak_uv * bump(t, e.occipital_onset_ms, e.occipital_peak_ms, e.occipital_offset_ms);
}
double motor(const ErpTemplateConfig& e, double t) {
  return e.motor_negativity_uv * bump(t, e.motor_onset_ms, e.motor_peak_ms, e.motor_offset_ms);
}
double normal(const ErpTemplateConfig& e, double t) {
  const double mid = 0.5 * (e.normal_onset_ms + e.normal_offset_ms);
  return e.normal_negativity_uv * bump(t, e.normal_onset_ms, mid, e.normal_offset_ms);
}

double template_value(const ErpTemplateConfig& erp, ClassLabel cls, double w_occ, double w_cen, double t) {
  switch (cls) {
    case ClassLabel::Emergency:
      return erp.amplitude_scale * (w_occ * occipital(erp, t) + w_cen * motor(erp, t));
    case ClassLabel::Normal:
      return erp.amplitude_scale * w_cen * normal(erp, t);
    case ClassLabel::NoBraking:
      return 0.0;
  }
  return 0.0;
}

// Voss-McCartney: row r is redrawn every 2^r samples; plus one white term.
Eigen::VectorXd pink_noise(std::size_t n, Engine& engine) {
  std::normal_distribution<double> normal01;
  std::array<double, kPinkRows> rows{};
  double running = 0.0;
  for (auto& r : rows) {
    r = normal01(engine);
    running += r;
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  const double scale = 1.0 / std::sqrt(kPinkRows + 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const int row = std::countr_zero(static_cast<std::uint64_t>(i));
      if (row < kPinkRows) {
        const double fresh = normal01(engine);
        running += fresh - rows[static_cast<std::size_t>(row)];
        rows[static_cast<std::size_t>(row)] = fresh;
      }
    }
    out[static_cast<Eigen::Index>(i)] = scale * (running + normal01(engine));
  }
  return out;
}

Eigen::MatrixXd random_orthogonal(std::size_t n, Engine& engine) {
  std::normal_distribution<double> normal01;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = normal01(engine);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

void add_transient(SampleMatrix& x, double rate, double center_ms, double width_ms, const Eigen::VectorXd& gains) {
  const auto first = std::max<std::int64_t>(0, ms_to_samples(center_ms - width_ms / 2.0, rate));
  const auto last = std::min<std::int64_t>(x.cols() - 1, ms_to_samples(center_ms + width_ms / 2.0, rate));
  for (auto i = first; i <= last; ++i) {
    const double t = 1000.0 * static_cast<double>(i) / rate;
    const double b = bump(t, center_ms - width_ms / 2.0, center_ms, center_ms + width_ms / 2.0);
    if (b != 0.0) x.col(i) += b * gains;
  }
}

}  // namespace

double erp_value(const ErpTemplateConfig& erp, ClassLabel cls, std::string_view channel, double t_rel_ms) {
  if (!ChannelMontage::standard28().index_of(channel))
    throw DataError("unknown channel label '" + std::string(channel) + "'");
  return template_value(erp, cls, weight(kOccipitalWeights, channel), weight(kCentralWeights, channel), t_rel_ms);
}

Eigen::MatrixXd subject_mixing_matrix(const NoiseConfig& noise, std::size_t channels, RngSeed subject_seed) {
  noise.validate();
  auto engine = make_engine(subject_seed);
  const Eigen::MatrixXd u = random_orthogonal(channels, engine);
  const Eigen::MatrixXd v = random_orthogonal(channels, engine);
  Eigen::VectorXd singular(static_cast<Eigen::Index>(channels));
  for (Eigen::Index k = 0; k < singular.size(); ++k)
    singular[k] = std::exp(-static_cast<double>(k) / noise.spatial_decay);
  Eigen::MatrixXd mixing = u * singular.asDiagonal() * v.transpose();
  for (Eigen::Index r = 0; r < mixing.rows(); ++r) mixing.row(r).normalize();
  return mixing;
}

ContinuousRecording generate_session(const ScenarioConfig& scn, const ErpTemplateConfig& erp,
                                     const NoiseConfig& noise, const ReactionTimeModel& rt, RngSeed seed) {
  scn.validate();
  erp.validate();
  noise.validate();
  rt.validate();

  ContinuousRecording rec;
  rec.montage = ChannelMontage::standard28();
  rec.sample_rate = 200.0;
  const double rate = rec.sample_rate;
  const auto channels = rec.montage.size();
  const auto length = static_cast<std::size_t>(ms_to_samples(scn.session_minutes * 60000.0, rate));
  const double duration_ms = 1000.0 * static_cast<double>(length) / rate;
  const double grid_ms = 1000.0 / rate;
  const auto on_grid = [&](double ms) { return grid_ms * std::round(ms / grid_ms); };

  const auto session = split_rng(seed, scn.mode == DrivingMode::Emergency ? 1 : 2);
  auto schedule_engine = make_engine(split_rng(session, 0));
  auto background_engine = make_engine(split_rng(session, 1));
  auto sensor_engine = make_engine(split_rng(session, 2));
  auto blink_engine = make_engine(split_rng(session, 3));
  auto outlier_engine = make_engine(split_rng(session, 4));

  // Event schedule: consecutive triggers are inter_event_s apart, drawn in
  // whole samples so every event sits on the sample grid.
  const auto gap_lo = static_cast<std::int64_t>(std::ceil(scn.inter_event_s.lo * rate - 1e-9));
  const auto gap_hi = static_cast<std::int64_t>(std::floor(scn.inter_event_s.hi * rate + 1e-9));
  if (gap_lo > gap_hi) throw UsageError("inter_event_s range is narrower than one sample");
  std::uniform_int_distribution<std::int64_t> gap(gap_lo, gap_hi);
  std::vector<double> presses;
  for (std::int64_t trigger = gap(schedule_engine);; trigger += gap(schedule_engine)) {
    const double light = grid_ms * static_cast<double>(trigger);
    if (scn.mode == DrivingMode::Emergency) {
      const double press = on_grid(light + sample_reaction_time(rt, schedule_engine));
      if (press > duration_ms) break;
      rec.events.push_back({light, BrakeLightOn{}});
      rec.events.push_back({press, BrakePedalPress{ClassLabel::Emergency}});
      presses.push_back(press);
    } else {
      if (light > duration_ms) break;
      rec.events.push_back({light, BrakePedalPress{ClassLabel::Normal}});
      presses.push_back(light);
    }
  }

  // Mixed pink background plus independent sensor noise.
  const Eigen::MatrixXd mixing = subject_mixing_matrix(noise, channels, split_rng(seed, 0));
  Eigen::MatrixXd sources(channels, length);
  for (std::size_t c = 0; c < channels; ++c)
    sources.row(static_cast<Eigen::Index>(c)) = pink_noise(length, background_engine).transpose();
  rec.samples = noise.rms_uv * (mixing * sources);
  sources.resize(0, 0);
  if (noise.sensor_noise_uv > 0.0) {
    std::normal_distribution<double> sensor(0.0, noise.sensor_noise_uv);
    for (Eigen::Index i = 0; i < rec.samples.size(); ++i) rec.samples.data()[i] += sensor(sensor_engine);
  }

  // Class templates time-locked to each press.
  const auto cls = scn.mode == DrivingMode::Emergency ? ClassLabel::Emergency : ClassLabel::Normal;
  Eigen::VectorXd w_occ(channels), w_cen(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    w_occ[static_cast<Eigen::Index>(c)] = weight(kOccipitalWeights, rec.montage.names()[c]);
    w_cen[static_cast<Eigen::Index>(c)] = weight(kCentralWeights, rec.montage.names()[c]);
  }
  for (const double press : presses) {
    const auto first = std::max<std::int64_t>(0, ms_to_samples(press - 3000.0, rate));
    const auto last = std::min<std::int64_t>(static_cast<std::int64_t>(length) - 1, ms_to_samples(press + 1000.0, rate));
    for (auto i = first; i <= last; ++i) {
      const double t_rel = 1000.0 * static_cast<double>(i) / rate - press;
      for (std::size_t c = 0; c < channels; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        rec.samples(ci, i) += template_value(erp, cls, w_occ[ci], w_cen[ci], t_rel);
      }
    }
  }

  // Frontal-weighted blinks.
  if (noise.blink_rate_per_min > 0.0 && noise.blink_amplitude_uv > 0.0) {
    Eigen::VectorXd gains(channels);
    for (std::size_t c = 0; c < channels; ++c)
      gains[static_cast<Eigen::Index>(c)] =
          noise.blink_amplitude_uv * std::clamp((rec.montage.positions()[c].y + 0.1) / 0.6, 0.0, 1.0);
    std::exponential_distribution<double> wait(noise.blink_rate_per_min / 60000.0);
    for (double t = wait(blink_engine); t < duration_ms; t += wait(blink_engine))
      add_transient(rec.samples, rate, t, kBlinkWidthMs, gains);
  }

  // Large single-channel transients; Poisson rate chosen so that a 4000 ms
  // window contains one with probability outlier_probability.
  if (noise.outlier_probability > 0.0 && noise.outlier_amplitude_uv > 0.0) {
    std::exponential_distribution<double> wait(-std::log1p(-noise.outlier_probability) / kOutlierWindowMs);
    std::uniform_int_distribution<std::size_t> channel(0, channels - 1);
    std::bernoulli_distribution positive(0.5);
    for (double t = wait(outlier_engine); t < duration_ms; t += wait(outlier_engine)) {
      Eigen::VectorXd gains = Eigen::VectorXd::Zero(channels);
      gains[static_cast<Eigen::Index>(channel(outlier_engine))] =
          positive(outlier_engine) ? noise.outlier_amplitude_uv : -noise.outlier_amplitude_uv;
      add_transient(rec.samples, rate, t, kOutlierWidthMs, gains);
    }
  }

  // Recordings are stored as 32-bit floats; quantize now so in-memory and on-disk data agree.
  for (Eigen::Index i = 0; i < rec.samples.size(); ++i)
    rec.samples.data()[i] = static_cast<float>(rec.samples.data()[i]);
  return rec;
}

}  // namespace brakesense
