#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace brakesense {

/// Channels x time, in microvolts. Row-major so that each channel is contiguous.
using SampleMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ClassLabel : std::uint8_t { Emergency = 0, Normal = 1, NoBraking = 2 };

std::string_view to_string(ClassLabel label);
std::optional<ClassLabel> parse_class_label(std::string_view text);

struct ScalpPosition {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const ScalpPosition&, const ScalpPosition&) = default;
};

class ChannelMontage {
 public:
  /// Throws DataError on duplicate names, fewer than two channels, size
  /// mismatch or positions outside the unit disc.
  ChannelMontage(std::vector<std::string> names, std::vector<ScalpPosition> positions);

  /// The 28-electrode 10-20 layout used throughout the driving study.
  static const ChannelMontage& standard28();

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<ScalpPosition>& positions() const { return positions_; }
  std::optional<std::size_t> index_of(std::string_view name) const;

  friend bool operator==(const ChannelMontage&, const ChannelMontage&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<ScalpPosition> positions_;
};

struct BrakeLightOn {
  friend bool operator==(const BrakeLightOn&, const BrakeLightOn&) = default;
};
struct BrakePedalPress {
  ClassLabel brake_class = ClassLabel::Emergency;  // Emergency or Normal
  friend bool operator==(const BrakePedalPress&, const BrakePedalPress&) = default;
};
using EventKind = std::variant<BrakeLightOn, BrakePedalPress>;

struct Event {
  double time_ms = 0.0;
  EventKind kind;
  friend bool operator==(const Event&, const Event&) = default;
};

struct ContinuousRecording {
  std::string subject;
  ChannelMontage montage = ChannelMontage::standard28();
  double sample_rate = 200.0;
  SampleMatrix samples;  // channels x time
  std::vector<Event> events;

  std::size_t num_samples() const { return static_cast<std::size_t>(samples.cols()); }
  double duration_ms() const { return 1000.0 * static_cast<double>(samples.cols()) / sample_rate; }
  /// Checks rate, shape and event ordering/range invariants; throws DataError.
  void validate() const;
};

/// round(ms * rate / 1000)
std::int64_t ms_to_samples(double ms, double sample_rate);

struct Epoch {
  ClassLabel label = ClassLabel::NoBraking;
  SampleMatrix samples;          // channels x time
  std::uint32_t t0_offset_ms = 3000;  // brake-pedal onset within the epoch
  friend bool operator==(const Epoch& a, const Epoch& b) {
    return a.label == b.label && a.t0_offset_ms == b.t0_offset_ms &&
           a.samples.rows() == b.samples.rows() && a.samples.cols() == b.samples.cols() &&
           a.samples == b.samples;
  }
};

struct EpochSet {
  ChannelMontage montage = ChannelMontage::standard28();
  std::uint32_t sample_rate = 200;
  std::vector<Epoch> epochs;
  std::string provenance;

  std::size_t channels() const { return montage.size(); }
  /// Samples per epoch; 0 when empty.
  std::size_t samples_per_epoch() const {
    return epochs.empty() ? 0 : static_cast<std::size_t>(epochs.front().samples.cols());
  }
  std::array<std::size_t, 3> class_counts() const;
  /// Every epoch has the montage's channel count and a common length.
  void validate() const;

  friend bool operator==(const EpochSet&, const EpochSet&) = default;
};

/// Concatenates epoch sets that share montage, rate and epoch shape.
EpochSet merge(const std::vector<EpochSet>& sets);

}  // namespace brakesense
