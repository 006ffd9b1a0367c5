#include "brakesense/epoching.hpp"

#include "brakesense/error.hpp"

#include <algorithm>
#include <numeric>
#include <cmath>
#include <ranges>

namespace brakesense {

void EpochWindowSpec::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw UsageError(std::string(name) + " must be strictly positive");
  };
  positive(pre_ms, "pre_ms");
  positive(post_ms, "post_ms");
  positive(baseline_ms, "baseline_ms");
  positive(artifact_threshold_uv, "artifact_threshold_uv");
  positive(no_brake_min_separation_ms, "no_brake_min_separation_ms");
  positive(no_brake_window_ms, "no_brake_window_ms");
  if (baseline_ms > pre_ms + post_ms) throw UsageError("baseline_ms exceeds the epoch duration");
}

namespace {

std::uint32_t checked_offset(double pre_ms) {
  return static_cast<std::uint32_t>(std::llround(pre_ms));
}

EpochSet empty_like(const ContinuousRecording& rec) {
  EpochSet set;
  set.montage = rec.montage;
  set.sample_rate = static_cast<std::uint32_t>(std::llround(rec.sample_rate));
  set.provenance = rec.subject;
  return set;
}

// Half-open ranges [begin, end) of eligible start samples.
struct Span {
  std::int64_t begin;
  std::int64_t end;
};

std::vector<Span> no_brake_spans(const ContinuousRecording& rec, const EpochWindowSpec& spec) {
  const double rate = rec.sample_rate;
  const std::int64_t window = ms_to_samples(spec.no_brake_window_ms, rate);
  const std::int64_t last_start = static_cast<std::int64_t>(rec.num_samples()) - window;
  if (last_start < 0) return {};

  // A window starting at sample s covers [s, s + window) samples, i.e. times
  // [s/rate, (s + window)/rate) seconds. Event e is far enough when
  // e <= start_ms - sep or e >= end_ms + sep.
  std::vector<Span> forbidden;
  for (const auto& ev : rec.events) {
    const double lo_ms = ev.time_ms - spec.no_brake_min_separation_ms - spec.no_brake_window_ms;
    const double hi_ms = ev.time_ms + spec.no_brake_min_separation_ms;
    // Forbidden starts: lo_ms < start_ms < hi_ms.
    const auto lo = static_cast<std::int64_t>(std::floor(lo_ms * rate / 1000.0)) + 1;
    const auto hi = static_cast<std::int64_t>(std::ceil(hi_ms * rate / 1000.0));
    forbidden.push_back({lo, hi});
  }
  std::sort(forbidden.begin(), forbidden.end(), [](Span a, Span b) { return a.begin < b.begin; });

  std::vector<Span> eligible;
  std::int64_t cursor = 0;
  for (const auto& f : forbidden) {
    if (f.begin > cursor) eligible.push_back({cursor, std::min(f.begin, last_start + 1)});
    cursor = std::max(cursor, f.end);
    if (cursor > last_start) break;
  }
  if (cursor <= last_start) eligible.push_back({cursor, last_start + 1});
  std::erase_if(eligible, [](Span s) { return s.end <= s.begin; });
  return eligible;
}

}  // namespace

BrakeEpochs extract_brake_epochs(const ContinuousRecording& rec, const EpochWindowSpec& spec) {
  spec.validate();
  BrakeEpochs out{empty_like(rec), 0};
  const double rate = rec.sample_rate;
  const auto pre = ms_to_samples(spec.pre_ms, rate);
  const auto post = ms_to_samples(spec.post_ms, rate);
  const auto total = static_cast<std::int64_t>(rec.num_samples());
  for (const auto& ev : rec.events) {
    const auto* press = std::get_if<BrakePedalPress>(&ev.kind);
    if (!press) continue;
    const auto onset = ms_to_samples(ev.time_ms, rate);
    const auto begin = onset - pre;
    if (begin < 0 || onset + post > total) {
      ++out.skipped;
      continue;
    }
    Epoch e;
    e.label = press->brake_class;
    e.t0_offset_ms = checked_offset(spec.pre_ms);
    e.samples = rec.samples.middleCols(begin, pre + post);
    out.set.epochs.push_back(std::move(e));
  }
  return out;
}

std::size_t count_no_brake_positions(const ContinuousRecording& rec, const EpochWindowSpec& spec) {
  std::size_t n = 0;
  for (const auto& s : no_brake_spans(rec, spec)) n += static_cast<std::size_t>(s.end - s.begin);
  return n;
}

EpochSet extract_no_brake_epochs(const ContinuousRecording& rec, const EpochWindowSpec& spec,
                                 std::size_t count, RngSeed seed) {
  spec.validate();
  if (count == 0) throw UsageError("no-braking epoch count must be positive");
  const auto spans = no_brake_spans(rec, spec);
  std::size_t available = 0;
  for (const auto& s : spans) available += static_cast<std::size_t>(s.end - s.begin);
  if (available < count)
    throw DataError("recording '" + rec.subject + "' has " + std::to_string(available) +
                    " eligible no-braking window positions, " + std::to_string(count) +
                    " requested (deficit " + std::to_string(count - available) + ")");

  std::vector<std::size_t> picks;
  picks.reserve(count);
  auto engine = make_engine(seed);
  std::vector<std::size_t> positions(available);
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  std::ranges::sample(positions, std::back_inserter(picks), static_cast<std::ptrdiff_t>(count), engine);

  const auto window = ms_to_samples(spec.no_brake_window_ms, rec.sample_rate);
  EpochSet set = empty_like(rec);
  set.epochs.reserve(count);
  std::size_t span_index = 0;
  std::size_t span_base = 0;
  for (const auto pick : picks) {  // ascending
    while (pick >= span_base + static_cast<std::size_t>(spans[span_index].end - spans[span_index].begin)) {
      span_base += static_cast<std::size_t>(spans[span_index].end - spans[span_index].begin);
      ++span_index;
    }
    const auto start = spans[span_index].begin + static_cast<std::int64_t>(pick - span_base);
    Epoch e;
    e.label = ClassLabel::NoBraking;
    e.t0_offset_ms = checked_offset(spec.pre_ms);
    e.samples = rec.samples.middleCols(start, window);
    set.epochs.push_back(std::move(e));
  }
  return set;
}

RejectionResult reject_artifacts(const EpochSet& set, double threshold_uv) {
  if (!(threshold_uv > 0.0)) throw UsageError("artifact threshold must be positive");
  RejectionResult out;
  out.kept.montage = set.montage;
  out.kept.sample_rate = set.sample_rate;
  out.kept.provenance = set.provenance;
  for (const auto& e : set.epochs) {
    if (e.samples.size() > 0 && e.samples.cwiseAbs().maxCoeff() > threshold_uv)
      ++out.rejected;
    else
      out.kept.epochs.push_back(e);
  }
  return out;
}

void baseline_correct_samples(SampleMatrix& samples, Eigen::Index baseline_samples) {
  if (baseline_samples <= 0) return;
  for (Eigen::Index ch = 0; ch < samples.rows(); ++ch) {
    const double mean = samples.row(ch).head(baseline_samples).mean();
    samples.row(ch).array() -= mean;
  }
}

EpochSet baseline_correct(const EpochSet& set, double baseline_ms) {
  const auto n = ms_to_samples(baseline_ms, set.sample_rate);
  if (baseline_ms < 0.0 || n > static_cast<std::int64_t>(set.samples_per_epoch()))
    throw UsageError("baseline of " + std::to_string(baseline_ms) + " ms exceeds the epoch length");
  EpochSet out = set;
  for (auto& e : out.epochs) baseline_correct_samples(e.samples, n);
  return out;
}

}  // namespace brakesense
