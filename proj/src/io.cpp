#include "brakesense/io.hpp"

#include "binary.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace brakesense {

std::string_view to_string(FormatErrc code) {
  switch (code) {
    case FormatErrc::BadMagic: return "bad magic";
    case FormatErrc::VersionMismatch: return "version mismatch";
    case FormatErrc::TruncatedPayload: return "truncated payload";
    case FormatErrc::ShapeInconsistency: return "shape inconsistency";
  }
  return "format error";
}

namespace {

void put_montage(Writer& w, const ChannelMontage& montage) {
  for (const auto& n : montage.names()) w.put_string16(n);
  for (const auto& p : montage.positions()) {
    w.put_f32(p.x);
    w.put_f32(p.y);
  }
}

ChannelMontage get_montage(Reader& r, std::size_t channels) {
  std::vector<std::string> names;
  std::vector<ScalpPosition> positions;
  for (std::size_t c = 0; c < channels; ++c) names.push_back(r.get_string16("channel names"));
  for (std::size_t c = 0; c < channels; ++c) {
    const double x = r.get<float>("channel positions");
    const double y = r.get<float>("channel positions");
    positions.push_back({x, y});
  }
  try {
    return ChannelMontage(std::move(names), std::move(positions));
  } catch (const DataError& e) {
    throw FormatError(FormatErrc::ShapeInconsistency, e.what());
  }
}

void check_magic(Reader& r, std::string_view magic) {
  if (r.remaining() < magic.size()) throw FormatError(FormatErrc::BadMagic, "file shorter than magic");
  if (r.get_raw(magic.size(), "magic") != magic)
    throw FormatError(FormatErrc::BadMagic, "expected '" + std::string(magic) + "'");
}

// Montage positions are stored as f32; quantize before encoding so that
// round trips compare equal.
ChannelMontage quantized(const ChannelMontage& m) {
  std::vector<ScalpPosition> pos;
  for (const auto& p : m.positions())
    pos.push_back({static_cast<float>(p.x), static_cast<float>(p.y)});
  return ChannelMontage(m.names(), std::move(pos));
}

}  // namespace

std::size_t epochset_header_size(const ChannelMontage& montage) {
  std::size_t n = 4 + 2 + 2 + 4 + 4 + 4;
  for (const auto& name : montage.names()) n += 2 + name.size();
  return n + montage.size() * 8;
}

std::vector<std::uint8_t> encode_epochset(const EpochSet& set) {
  set.validate();
  const auto channels = set.channels();
  const auto length = set.samples_per_epoch();
  Writer w;
  w.put_raw("EPO1");
  w.put(kEpochFormatVersion);
  w.put(static_cast<std::uint16_t>(channels));
  w.put(static_cast<std::uint32_t>(length));
  w.put(set.sample_rate);
  w.put(static_cast<std::uint32_t>(set.epochs.size()));
  put_montage(w, quantized(set.montage));
  for (const auto& e : set.epochs) {
    w.put(static_cast<std::uint8_t>(e.label));
    w.put(e.t0_offset_ms);
    w.put_samples(e.samples);
  }
  if (!set.provenance.empty()) {
    w.put(static_cast<std::uint32_t>(set.provenance.size()));
    w.put_raw(set.provenance);
  }
  return w.take();
}

EpochSet decode_epochset(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  check_magic(r, "EPO1");
  const auto version = r.get<std::uint16_t>("header");
  if (version != kEpochFormatVersion)
    throw FormatError(FormatErrc::VersionMismatch, "EPO1 version " + std::to_string(version) +
                                                       ", expected " + std::to_string(kEpochFormatVersion));
  const auto channels = r.get<std::uint16_t>("header");
  const auto length = r.get<std::uint32_t>("header");
  const auto rate = r.get<std::uint32_t>("header");
  const auto count = r.get<std::uint32_t>("header");
  if (channels < 2) throw FormatError(FormatErrc::ShapeInconsistency, "channel count below 2");
  if (rate == 0) throw FormatError(FormatErrc::ShapeInconsistency, "zero sample rate");
  if (count > 0 && length == 0) throw FormatError(FormatErrc::ShapeInconsistency, "zero-length epochs");

  EpochSet set;
  set.montage = get_montage(r, channels);
  set.sample_rate = rate;
  const double duration_ms = 1000.0 * length / rate;
  set.epochs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Epoch e;
    const auto label = r.get<std::uint8_t>("epoch record");
    if (label > 2)
      throw FormatError(FormatErrc::ShapeInconsistency, "epoch " + std::to_string(i) + " has label " +
                                                            std::to_string(label));
    e.label = static_cast<ClassLabel>(label);
    e.t0_offset_ms = r.get<std::uint32_t>("epoch record");
    if (e.t0_offset_ms > duration_ms)
      throw FormatError(FormatErrc::ShapeInconsistency,
                        "epoch " + std::to_string(i) + " onset offset beyond epoch end");
    e.samples = r.get_samples(channels, length, "epoch samples");
    set.epochs.push_back(std::move(e));
  }
  if (r.remaining() > 0) {
    const auto n = r.get<std::uint32_t>("provenance");
    set.provenance = r.get_raw(n, "provenance");
    if (r.remaining() != 0)
      throw FormatError(FormatErrc::ShapeInconsistency,
                        std::to_string(r.remaining()) + " unexpected trailing bytes");
  }
  return set;
}

std::vector<std::uint8_t> encode_recording(const ContinuousRecording& rec) {
  rec.validate();
  const double rate = std::round(rec.sample_rate);
  if (rate != rec.sample_rate) throw DataError("REC1 stores integer sample rates only");
  Writer w;
  w.put_raw("REC1");
  w.put(kRecordingFormatVersion);
  w.put(static_cast<std::uint16_t>(rec.montage.size()));
  w.put(static_cast<std::uint32_t>(rate));
  w.put(static_cast<std::uint64_t>(rec.num_samples()));
  w.put_string16(rec.subject);
  put_montage(w, quantized(rec.montage));
  w.put(static_cast<std::uint32_t>(rec.events.size()));
  for (const auto& e : rec.events) {
    w.put(e.time_ms);
    if (const auto* press = std::get_if<BrakePedalPress>(&e.kind)) {
      w.put(std::uint8_t{1});
      w.put(static_cast<std::uint8_t>(press->brake_class));
    } else {
      w.put(std::uint8_t{0});
      w.put(std::uint8_t{0xff});
    }
  }
  w.put_samples(rec.samples);
  return w.take();
}

ContinuousRecording decode_recording(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  check_magic(r, "REC1");
  const auto version = r.get<std::uint16_t>("header");
  if (version != kRecordingFormatVersion)
    throw FormatError(FormatErrc::VersionMismatch, "REC1 version " + std::to_string(version));
  const auto channels = r.get<std::uint16_t>("header");
  const auto rate = r.get<std::uint32_t>("header");
  const auto length = r.get<std::uint64_t>("header");
  if (channels < 2) throw FormatError(FormatErrc::ShapeInconsistency, "channel count below 2");
  if (rate == 0) throw FormatError(FormatErrc::ShapeInconsistency, "zero sample rate");
  ContinuousRecording rec;
  rec.subject = r.get_string16("subject");
  rec.montage = get_montage(r, channels);
  rec.sample_rate = rate;
  const auto events = r.get<std::uint32_t>("event table");
  for (std::uint32_t i = 0; i < events; ++i) {
    Event e;
    e.time_ms = r.get<double>("event table");
    const auto kind = r.get<std::uint8_t>("event table");
    const auto cls = r.get<std::uint8_t>("event table");
    if (kind == 0) {
      e.kind = BrakeLightOn{};
    } else if (kind == 1 && cls <= 1) {
      e.kind = BrakePedalPress{static_cast<ClassLabel>(cls)};
    } else {
      throw FormatError(FormatErrc::ShapeInconsistency, "invalid event " + std::to_string(i));
    }
    rec.events.push_back(e);
  }
  rec.samples = r.get_samples(channels, length, "samples");
  if (r.remaining() != 0) throw FormatError(FormatErrc::ShapeInconsistency, "unexpected trailing bytes");
  try {
    rec.validate();
  } catch (const FormatError&) {
    throw;
  } catch (const DataError& e) {
    throw FormatError(FormatErrc::ShapeInconsistency, e.what());
  }
  return rec;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& contents) {
  write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(contents.data()), contents.size()));
}

void write_epochset(const EpochSet& set, const std::filesystem::path& path) {
  write_file_atomic(path, encode_epochset(set));
}

EpochSet read_epochset(const std::filesystem::path& path) { return decode_epochset(read_file(path)); }

void write_recording(const ContinuousRecording& rec, const std::filesystem::path& path) {
  write_file_atomic(path, encode_recording(rec));
}

ContinuousRecording read_recording(const std::filesystem::path& path) {
  return decode_recording(read_file(path));
}

std::string events_csv(const std::vector<Event>& events) {
  std::string out = "timestamp_ms,kind,class\n";
  for (const auto& ev : events) {
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "%.10g", ev.time_ms);  // full resolution: sessions run past 10^6 ms
    out += stamp;
    if (const auto* press = std::get_if<BrakePedalPress>(&ev.kind))
      out += ",brake_pedal," + std::string(to_string(press->brake_class)) + "\n";
    else
      out += ",brake_light,\n";
  }
  return out;
}

std::string format6(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value == 0.0 ? 0.0 : value);
  return buf;
}

double round6(double value) {
  if (!std::isfinite(value)) return value;
  return std::strtod(format6(value).c_str(), nullptr);
}

}  // namespace brakesense
