#pragma once

#include "brakesense/rng.hpp"
#include "brakesense/types.hpp"

#include <string_view>

namespace brakesense {

enum class DrivingMode { Emergency, Normal };

std::string_view to_string(DrivingMode mode);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct ScenarioConfig {
  double session_minutes = 30.0;
  Range inter_event_s{15.0, 60.0};
  DrivingMode mode = DrivingMode::Emergency;
  double lead_speed_kmh = 60.0;  // metadata only
  Range gap_m{6.0, 12.0};        // metadata only

  void validate() const;
};

/// Emergency-braking response time: shift + exp(mu + sigma * Z), truncated to
/// [min_ms, max_ms] by rejection.
struct ReactionTimeModel {
  double shift_ms = 0.0;
  double mu = 0.0;
  double sigma = 0.0;
  double min_ms = 300.0;
  double max_ms = 1490.0;

  void validate() const;
  /// Quantile of the truncated distribution.
  double quantile(double p) const;
  /// Mean of the truncated distribution (numerical quadrature).
  double mean() const;
};

double sample_reaction_time(const ReactionTimeModel& model, Engine& engine);
double sample_reaction_time(const ReactionTimeModel& model, RngSeed seed);

/// Least-squares fit of the truncated shifted log-normal to the reported
/// response-time percentiles P5/P25/P50/P75/P95 = 520/660/750/850/1020 ms.
/// Frozen result; the residual sum of squares is kDefaultRtFitResidual.
ReactionTimeModel fit_default_rt_model();
inline constexpr double kDefaultRtFitResidual = 91.1829;  // ms^2

/// Class-conditional ERP templates. Bumps are raised cosines with separate
/// rise (onset to peak) and decay (peak to offset) half-periods.
struct ErpTemplateConfig {
  double occipital_peak_uv = 6.0;
  double occipital_onset_ms = -400.0;
  double occipital_peak_ms = -300.0;
  double occipital_offset_ms = 0.0;

  double motor_negativity_uv = -3.0;
  double motor_onset_ms = -200.0;
  double motor_peak_ms = 0.0;
  double motor_offset_ms = 300.0;

  double normal_negativity_uv = -1.5;
  double normal_onset_ms = -900.0;
  double normal_offset_ms = -400.0;

  double amplitude_scale = 1.0;

  void validate() const;
};

/// Template value for `channel` at t_rel_ms relative to pedal onset.
/// Throws DataError for channels absent from the standard montage.
double erp_value(const ErpTemplateConfig& erp, ClassLabel cls, std::string_view channel, double t_rel_ms);

struct NoiseConfig {
  double rms_uv = 6.0;              // broadband pink background per channel
  double spatial_decay = 2.0;       // singular-value decay of the mixing matrix, exp(-k / decay)
  double sensor_noise_uv = 0.5;     // independent white noise per channel
  double blink_rate_per_min = 2.0;
  double blink_amplitude_uv = 80.0;
  double outlier_probability = 0.02;  // P(a 4000 ms window holds a >300 uV transient)
  double outlier_amplitude_uv = 500.0;

  void validate() const;
};

/// Per-subject channel mixing matrix (unit-norm rows, full rank), derived from the subject seed.
Eigen::MatrixXd subject_mixing_matrix(const NoiseConfig& noise, std::size_t channels, RngSeed subject_seed);

/// Generates one driving session. The seed identifies the subject: sessions of
/// both modes generated from one seed share the subject's spatial mixing.
ContinuousRecording generate_session(const ScenarioConfig& scn, const ErpTemplateConfig& erp,
                                     const NoiseConfig& noise, const ReactionTimeModel& rt, RngSeed seed);

}  // namespace brakesense
