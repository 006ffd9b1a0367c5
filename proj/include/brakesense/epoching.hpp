#pragma once

#include "brakesense/rng.hpp"
#include "brakesense/types.hpp"

#include <array>
#include <cstddef>

namespace brakesense {

struct EpochWindowSpec {
  double pre_ms = 3000.0;
  double post_ms = 1000.0;
  double baseline_ms = 500.0;
  double artifact_threshold_uv = 300.0;
  double no_brake_min_separation_ms = 3000.0;
  double no_brake_window_ms = 4000.0;

  /// Throws UsageError when a field is non-positive or the baseline exceeds the epoch.
  void validate() const;
};

struct BrakeEpochs {
  EpochSet set;
  std::size_t skipped = 0;  // presses whose window leaves the recording
};

/// One epoch of [press - pre_ms, press + post_ms) per pedal press, labeled by the press class.
BrakeEpochs extract_brake_epochs(const ContinuousRecording& rec, const EpochWindowSpec& spec);

/// Number of window start positions (in samples) that keep the whole window at
/// least `no_brake_min_separation_ms` away from every event.
std::size_t count_no_brake_positions(const ContinuousRecording& rec, const EpochWindowSpec& spec);

/// Draws `count` distinct eligible window positions uniformly without
/// replacement. Throws DataError naming the deficit when too few exist.
EpochSet extract_no_brake_epochs(const ContinuousRecording& rec, const EpochWindowSpec& spec,
                                 std::size_t count, RngSeed seed);

struct RejectionResult {
  EpochSet kept;
  std::size_t rejected = 0;
};

/// Drops every epoch holding a sample with |value| > threshold_uv (strict).
RejectionResult reject_artifacts(const EpochSet& set, double threshold_uv);

/// Subtracts, per epoch and channel, the mean of the first baseline_ms.
EpochSet baseline_correct(const EpochSet& set, double baseline_ms);

/// In-place kernel behind baseline_correct.
void baseline_correct_samples(SampleMatrix& samples, Eigen::Index baseline_samples);

}  // namespace brakesense
