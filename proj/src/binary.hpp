#pragma once

// Little-endian byte buffers shared by the binary formats.

#include "brakesense/io.hpp"

#include <bit>
#include <cstring>

namespace brakesense {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_f32(double value) { put(static_cast<float>(value)); }
  void put_string16(std::string_view s) {
    if (s.size() > 0xffff) throw DataError("string too long for u16 length prefix");
    put(static_cast<std::uint16_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_raw(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void put_samples(const SampleMatrix& m) {
    const auto offset = bytes_.size();
    bytes_.resize(offset + static_cast<std::size_t>(m.size()) * 4);
    auto* out = bytes_.data() + offset;
    const double* in = m.data();  // row-major: channel-major order
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const float f = static_cast<float>(in[i]);
      std::memcpy(out + 4 * i, &f, 4);
    }
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string16(const char* what) {
    const auto n = get<std::uint16_t>(what);
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string get_raw(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  SampleMatrix get_samples(std::size_t rows, std::size_t cols, const char* what) {
    const std::size_t count = rows * cols;
    if (cols != 0 && count / cols != rows) throw FormatError(FormatErrc::ShapeInconsistency, "sample count overflow");
    need(count * 4, what);
    SampleMatrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    double* out = m.data();
    const auto* in = bytes_.data() + pos_;
    for (std::size_t i = 0; i < count; ++i) {
      float f;
      std::memcpy(&f, in + 4 * i, 4);
      out[i] = f;
    }
    pos_ += count * 4;
    return m;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n)
      throw FormatError(FormatErrc::TruncatedPayload, std::string("file ends inside ") + what);
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace brakesense
