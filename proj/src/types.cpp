#include "brakesense/types.hpp"

#include "brakesense/error.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace brakesense {

std::string_view to_string(ClassLabel label) {
  switch (label) {
    case ClassLabel::Emergency: return "emergency";
    case ClassLabel::Normal: return "normal";
    case ClassLabel::NoBraking: return "none";
  }
  return "?";
}

std::optional<ClassLabel> parse_class_label(std::string_view text) {
  if (text == "emergency") return ClassLabel::Emergency;
  if (text == "normal") return ClassLabel::Normal;
  if (text == "none" || text == "no-braking") return ClassLabel::NoBraking;
  return std::nullopt;
}

ChannelMontage::ChannelMontage(std::vector<std::string> names, std::vector<ScalpPosition> positions)
    : names_(std::move(names)), positions_(std::move(positions)) {
  if (names_.size() < 2) throw DataError("montage needs at least two channels");
  if (names_.size() != positions_.size())
    throw DataError("montage has " + std::to_string(names_.size()) + " names but " +
                    std::to_string(positions_.size()) + " positions");
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (!seen.insert(n).second) throw DataError("duplicate channel name '" + n + "'");
  }
  for (std::size_t i = 0; i < positions_.size(); ++i) {
    const auto& p = positions_[i];
    if (!(std::hypot(p.x, p.y) <= 1.0))
      throw DataError("channel '" + names_[i] + "' lies outside the unit disc");
  }
}

const ChannelMontage& ChannelMontage::standard28() {
  // Azimuthal projection, nose towards +y, Cz at the origin, T7/T8 and Oz at r = 0.8.
  // Coordinates are f32-representable so montages survive the binary formats unchanged.
  static const auto f = [](double x, double y) {
    return ScalpPosition{static_cast<float>(x), static_cast<float>(y)};
  };
  static const ChannelMontage montage(
      {"F5", "F3", "Fz", "F4", "F6", "FT7", "FC5", "FC1", "FC2", "FC6", "FT8", "T7", "C3", "Cz",
       "C4", "T8", "CP5", "CP1", "CP2", "CP6", "P5", "P3", "Pz", "P4", "P6", "O1", "Oz", "O2"},
      {f(-0.50, 0.50), f(-0.32, 0.44), f(0.00, 0.40), f(0.32, 0.44), f(0.50, 0.50),
       f(-0.76, 0.25), f(-0.57, 0.22), f(-0.19, 0.20), f(0.19, 0.20), f(0.57, 0.22), f(0.76, 0.25),
       f(-0.80, 0.00), f(-0.40, 0.00), f(0.00, 0.00), f(0.40, 0.00), f(0.80, 0.00),
       f(-0.57, -0.22), f(-0.19, -0.20), f(0.19, -0.20), f(0.57, -0.22),
       f(-0.50, -0.50), f(-0.32, -0.44), f(0.00, -0.40), f(0.32, -0.44), f(0.50, -0.50),
       f(-0.25, -0.76), f(0.00, -0.80), f(0.25, -0.76)});
  return montage;
}

std::optional<std::size_t> ChannelMontage::index_of(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names_.begin());
}

void ContinuousRecording::validate() const {
  if (!(sample_rate > 0.0)) throw DataError("sample rate must be positive");
  if (static_cast<std::size_t>(samples.rows()) != montage.size())
    throw DataError("recording has " + std::to_string(samples.rows()) + " channels, montage has " +
                    std::to_string(montage.size()));
  const double duration = duration_ms();
  double previous = 0.0;
  for (const auto& e : events) {
    if (e.time_ms < 0.0 || e.time_ms > duration)
      throw DataError("event at " + std::to_string(e.time_ms) + " ms lies outside the recording");
    if (e.time_ms < previous) throw DataError("event timestamps must be nondecreasing");
    previous = e.time_ms;
  }
}

std::int64_t ms_to_samples(double ms, double sample_rate) {
  return static_cast<std::int64_t>(std::llround(ms * sample_rate / 1000.0));
}

std::array<std::size_t, 3> EpochSet::class_counts() const {
  std::array<std::size_t, 3> counts{};
  for (const auto& e : epochs) ++counts[static_cast<std::size_t>(e.label)];
  return counts;
}

void EpochSet::validate() const {
  if (sample_rate == 0) throw DataError("epoch set sample rate must be positive");
  const auto length = samples_per_epoch();
  for (std::size_t i = 0; i < epochs.size(); ++i) {
    const auto& e = epochs[i];
    if (static_cast<std::size_t>(e.samples.rows()) != montage.size() ||
        static_cast<std::size_t>(e.samples.cols()) != length)
      throw DataError("epoch " + std::to_string(i) + " has shape " + std::to_string(e.samples.rows()) +
                      "x" + std::to_string(e.samples.cols()) + ", expected " +
                      std::to_string(montage.size()) + "x" + std::to_string(length));
    if (static_cast<double>(e.t0_offset_ms) > 1000.0 * static_cast<double>(length) / sample_rate)
      throw DataError("epoch " + std::to_string(i) + " onset offset lies beyond the epoch end");
  }
}

EpochSet merge(const std::vector<EpochSet>& sets) {
  EpochSet out;
  bool first = true;
  for (const auto& s : sets) {
    if (s.epochs.empty() && !first) continue;
    if (first) {
      out.montage = s.montage;
      out.sample_rate = s.sample_rate;
      out.provenance = s.provenance;
      first = false;
    } else if (!(s.montage == out.montage) || s.sample_rate != out.sample_rate) {
      throw DataError("cannot merge epoch sets with different montage or sample rate");
    }
    out.epochs.insert(out.epochs.end(), s.epochs.begin(), s.epochs.end());
  }
  out.validate();
  return out;
}

}  // namespace brakesense
