#pragma once

#include "brakesense/error.hpp"
#include "brakesense/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace brakesense {

enum class FormatErrc {
  BadMagic,
  VersionMismatch,
  TruncatedPayload,
  ShapeInconsistency,
};

std::string_view to_string(FormatErrc code);

class FormatError : public DataError {
 public:
  FormatError(FormatErrc code, const std::string& what)
      : DataError(std::string(to_string(code)) + ": " + what), code_(code) {}
  FormatErrc code() const noexcept { return code_; }

 private:
  FormatErrc code_;
};

inline constexpr std::uint16_t kEpochFormatVersion = 1;
inline constexpr std::uint16_t kRecordingFormatVersion = 1;

// EPO1 layout, all integers little-endian:
//   "EPO1" u16 version u16 C u32 T u32 rate u32 N
//   C x (u16 len, UTF-8 name)   C x (f32 x, f32 y)
//   N x (u8 label, u32 t0_offset_ms, C*T f32 channel-major)
//   optional trailer: u32 len, UTF-8 provenance
std::vector<std::uint8_t> encode_epochset(const EpochSet& set);
EpochSet decode_epochset(const std::vector<std::uint8_t>& bytes);
void write_epochset(const EpochSet& set, const std::filesystem::path& path);
EpochSet read_epochset(const std::filesystem::path& path);

/// Size in bytes of the fixed header plus channel table (everything before the records).
std::size_t epochset_header_size(const ChannelMontage& montage);

// REC1: continuous recordings handed from `simulate` to `preprocess`.
//   "REC1" u16 version u16 C u32 rate u64 samples u16 len subject
//   C x (u16 len, name)  C x (f32 x, f32 y)
//   u32 E, E x (f64 time_ms, u8 kind [0 light, 1 pedal], u8 class)
//   C*samples f32 channel-major
std::vector<std::uint8_t> encode_recording(const ContinuousRecording& rec);
ContinuousRecording decode_recording(const std::vector<std::uint8_t>& bytes);
void write_recording(const ContinuousRecording& rec, const std::filesystem::path& path);
ContinuousRecording read_recording(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents);

/// timestamp_ms,kind,class rows; class is empty for brake-light events.
std::string events_csv(const std::vector<Event>& events);

/// Shortest "%.6g" rendering used for every numeric output.
std::string format6(double value);
/// Rounds to six significant digits (for JSON outputs).
double round6(double value);

}  // namespace brakesense
