#include "brakesense/pipeline.hpp"

#include "brakesense/error.hpp"

#include <cstdio>

namespace brakesense {

std::string subject_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%02zu", index + 1);
  return buf;
}

RngSeed subject_seed(RngSeed root, std::size_t index) { return split_rng(root, 0x5000 + index); }

RngSeed preprocess_seed(RngSeed root, std::string_view subject) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : subject) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return split_rng(root, h);
}

ContinuousRecording simulate_recording(const SimulationConfig& sim, DrivingMode mode, std::size_t subject,
                                       RngSeed root) {
  ScenarioConfig scn = sim.scenario;
  scn.mode = mode;
  auto rec = generate_session(scn, sim.erp, sim.noise, sim.rt, subject_seed(root, subject));
  rec.subject = subject_id(subject);
  return rec;
}

PreprocessedSubject preprocess_recordings(std::span<const ContinuousRecording> recordings,
                                          const PreprocessConfig& config, RngSeed seed) {
  if (recordings.empty()) throw UsageError("no recordings to preprocess");
  config.epochs.validate();
  for (const auto& r : recordings) {
    r.validate();
    if (r.subject != recordings.front().subject) throw DataError("recordings of different subjects mixed");
  }
  PreprocessedSubject out;
  std::vector<EpochSet> parts;
  for (std::size_t i = 0; i < recordings.size(); ++i) {
    FirDesign design = config.filter;
    design.sample_rate = recordings[i].sample_rate;
    const auto filtered = apply_filter(recordings[i], design_bandpass(design));
    auto brake = extract_brake_epochs(filtered, config.epochs);
    out.report.skipped += brake.skipped;
    parts.push_back(std::move(brake.set));
    std::size_t count = config.no_brake_count / recordings.size() + (i < config.no_brake_count % recordings.size());
    if (count > 0) parts.push_back(extract_no_brake_epochs(filtered, config.epochs, count, split_rng(seed, i)));
  }
  EpochSet merged = merge(parts);
  out.report.total = merged.epochs.size();
  auto rejection = reject_artifacts(merged, config.epochs.artifact_threshold_uv);
  out.report.rejected = rejection.rejected;
  out.set = baseline_correct(rejection.kept, config.epochs.baseline_ms);
  out.set.provenance = recordings.front().subject;
  out.report.kept_per_class = out.set.class_counts();
  return out;
}

PreprocessedSubject simulate_subject(const SimulationConfig& sim, const PreprocessConfig& pre, std::size_t subject,
                                     RngSeed root) {
  const std::vector<ContinuousRecording> recs{simulate_recording(sim, DrivingMode::Emergency, subject, root),
                                              simulate_recording(sim, DrivingMode::Normal, subject, root)};
  return preprocess_recordings(recs, pre, preprocess_seed(root, subject_id(subject)));
}

std::string make_provenance(const std::string& subject, const PreprocessReport& report, std::uint64_t config_hash) {
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  return "subject=" + subject + ";total=" + std::to_string(report.total) + ";rejected=" +
         std::to_string(report.rejected) + ";config=" + hash;
}

std::optional<std::string> provenance_field(const std::string& provenance, std::string_view key) {
  std::size_t pos = 0;
  while (pos <= provenance.size()) {
    const auto end = std::min(provenance.find(';', pos), provenance.size());
    const std::string_view item(provenance.data() + pos, end - pos);
    const auto eq = item.find('=');
    if (eq != std::string_view::npos && item.substr(0, eq) == key) return std::string(item.substr(eq + 1));
    pos = end + 1;
  }
  return std::nullopt;
}

}  // namespace brakesense
