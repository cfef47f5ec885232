#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <vector>

namespace snpd {

// Big-endian byte packing used by message encodings.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }

  void u16(std::uint16_t v) {
    out_.push_back(static_cast<std::uint8_t>(v >> 8));
    out_.push_back(static_cast<std::uint8_t>(v));
  }

  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8)
      out_.push_back(static_cast<std::uint8_t>(v >> s));
  }

  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }

  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8)
      out_.push_back(static_cast<std::uint8_t>(v >> s));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void raw(std::span<const std::uint8_t> data) {
    out_.insert(out_.end(), data.begin(), data.end());
  }

  const std::vector<std::uint8_t>& bytes() const { return out_; }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

// Failure-latching reader: any read past the end flips ok() and returns
// zeroes, so decoders can validate once at the end.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return take(1) ? data_[pos_ - 1] : 0; }

  std::uint16_t u16() {
    if (!take(2)) return 0;
    return static_cast<std::uint16_t>((data_[pos_ - 2] << 8) | data_[pos_ - 1]);
  }

  std::uint32_t u32() {
    if (!take(4)) return 0;
    std::uint32_t v = 0;
    for (std::size_t i = pos_ - 4; i < pos_; ++i) v = (v << 8) | data_[i];
    return v;
  }

  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }

  std::uint64_t u64() {
    if (!take(8)) return 0;
    std::uint64_t v = 0;
    for (std::size_t i = pos_ - 8; i < pos_; ++i) v = (v << 8) | data_[i];
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  bool raw(std::span<std::uint8_t> dst) {
    if (!take(dst.size())) return false;
    std::memcpy(dst.data(), data_.data() + pos_ - dst.size(), dst.size());
    return true;
  }

  bool ok() const { return ok_; }
  bool at_end() const { return ok_ && pos_ == data_.size(); }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  bool take(std::size_t n) {
    if (!ok_ || data_.size() - pos_ < n) {
      ok_ = false;
      return false;
    }
    pos_ += n;
    return true;
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  bool ok_ = true;
};

}  // namespace snpd
