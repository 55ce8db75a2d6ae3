#pragma once

// Big-endian byte serialization and the CRC-64 used by streams and
// manifests.

#include <Eigen/Core>

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "rcc/errors.hpp"

namespace rcc {

// CRC-64/XZ: reflected polynomial 0x42F0E1EBA9EA3693, init and xorout all ones.
std::uint64_t crc64(std::span<const std::uint8_t> bytes);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(std::span<const std::uint8_t> b) { bytes_.insert(bytes_.end(), b.begin(), b.end()); }

  // u32 count followed by the values.
  template <typename Derived>
  void doubles(const Eigen::DenseBase<Derived>& values) {
    u32(static_cast<std::uint32_t>(values.size()));
    for (Eigen::Index i = 0; i < values.size(); ++i) f64(values.derived().coeff(i));
  }

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = n - 1; i >= 0; --i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

// Reads what ByteWriter wrote; running past the end is a CorruptStream.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }

  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = bytes_.subspan(at_, n);
    at_ += n;
    return s;
  }

  // Counted array; `expected` guards against a corrupt count.
  Eigen::VectorXd doubles(std::size_t expected) {
    const std::uint32_t n = u32();
    if (n != expected) {
      throw CorruptStream("array holds " + std::to_string(n) + " values, expected " + std::to_string(expected));
    }
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (std::uint32_t i = 0; i < n; ++i) v(i) = f64();
    return v;
  }

  std::size_t position() const { return at_; }
  std::size_t remaining() const { return bytes_.size() - at_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - at_ < n) throw CorruptStream("stream truncated");
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v = (v << 8) | bytes_[at_++];
    return v;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t at_ = 0;
};

}  // namespace rcc
