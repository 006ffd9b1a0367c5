#pragma once

#include "brakesense/epoching.hpp"
#include "brakesense/fir.hpp"
#include "brakesense/synth.hpp"

#include <array>
#include <optional>
#include <string_view>
#include <span>
#include <string>

namespace brakesense {

struct SimulationConfig {
  ScenarioConfig scenario;
  ErpTemplateConfig erp;
  NoiseConfig noise;
  ReactionTimeModel rt = fit_default_rt_model();
};

struct PreprocessConfig {
  FirDesign filter;
  EpochWindowSpec epochs;
  std::size_t no_brake_count = 200;  // per subject, split evenly over its recordings
};

/// "S01", "S02", ...
std::string subject_id(std::size_t index);
/// Generator seed of subject `index` (shared by both of its sessions).
RngSeed subject_seed(RngSeed root, std::size_t index);

/// Seed for the no-braking window draw of one subject's recordings.
RngSeed preprocess_seed(RngSeed root, std::string_view subject);

ContinuousRecording simulate_recording(const SimulationConfig& sim, DrivingMode mode, std::size_t subject,
                                       RngSeed root);

struct PreprocessReport {
  std::size_t total = 0;
  std::size_t rejected = 0;
  std::size_t skipped = 0;  // presses too close to a recording edge
  std::array<std::size_t, 3> kept_per_class{};
};

struct PreprocessedSubject {
  EpochSet set;
  PreprocessReport report;
};

/// Filter, cut brake and no-braking epochs, reject artifacts, baseline-correct.
/// All recordings must belong to one subject.
PreprocessedSubject preprocess_recordings(std::span<const ContinuousRecording> recordings,
                                          const PreprocessConfig& config, RngSeed seed);

/// Both sessions of one subject, simulated and preprocessed in memory.
PreprocessedSubject simulate_subject(const SimulationConfig& sim, const PreprocessConfig& pre, std::size_t subject,
                                     RngSeed root);

/// "key=value;key=value" metadata stored as EpochSet provenance.
std::string make_provenance(const std::string& subject, const PreprocessReport& report, std::uint64_t config_hash);
std::optional<std::string> provenance_field(const std::string& provenance, std::string_view key);

}  // namespace brakesense
