#pragma once

// Little-endian byte encoding shared by the feature, bank and checkpoint
// codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "asal/error.hpp"

namespace asal::io {

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }

  void u32(std::uint32_t v) { put_le(v); }
  void u64(std::uint64_t v) { put_le(v); }
  void f32(float v) { put_le(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { put_le(std::bit_cast<std::uint64_t>(v)); }

  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s);
  }

  const std::string& buffer() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  template <typename U>
  void put_le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }

  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

  void need(std::size_t n, const std::string& what) const {
    if (remaining() < n) {
      throw FormatError("truncated " + what + ": expected " + std::to_string(n) + " more byte(s), found " +
                            std::to_string(remaining()),
                        pos_);
    }
  }

  std::string_view bytes(std::size_t n, const std::string& what) {
    need(n, what);
    auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::uint32_t u32(const std::string& what) { return get_le<std::uint32_t>(what); }
  std::uint64_t u64(const std::string& what) { return get_le<std::uint64_t>(what); }
  float f32(const std::string& what) { return std::bit_cast<float>(get_le<std::uint32_t>(what)); }
  double f64(const std::string& what) { return std::bit_cast<double>(get_le<std::uint64_t>(what)); }

  std::string str(const std::string& what) {
    const auto n = u32(what + " length");
    return std::string(bytes(n, what));
  }

  void expect_magic(std::string_view magic, const std::string& what) {
    const std::size_t at = pos_;
    if (remaining() < magic.size() || data_.substr(pos_, magic.size()) != magic) {
      throw FormatError("bad magic for " + what + ", expected \"" + std::string(magic) + "\"", at);
    }
    pos_ += magic.size();
  }

  void expect_end(const std::string& what) const {
    if (remaining() != 0) {
      throw FormatError(what + ": " + std::to_string(remaining()) + " trailing byte(s)", pos_);
    }
  }

 private:
  template <typename U>
  U get_le(const std::string& what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace asal::io
