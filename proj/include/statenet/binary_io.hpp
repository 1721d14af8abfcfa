#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

// Little-endian encoding helpers shared by the embedding and checkpoint files.
namespace statenet::binary {

class Writer {
 public:
  void bytes(std::string_view s) { buf_.append(s); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  const std::string& buffer() const { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string buf_;
};

// Reader over an in-memory byte buffer. Each accessor returns false instead
// of reading past the end.
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  bool bytes(std::size_t n, std::string_view* out) {
    if (remaining() < n) return false;
    *out = data_.substr(pos_, n);
    pos_ += n;
    return true;
  }
  bool u32(std::uint32_t* v) {
    std::uint64_t x;
    if (!get(4, &x)) return false;
    *v = static_cast<std::uint32_t>(x);
    return true;
  }
  bool u64(std::uint64_t* v) { return get(8, v); }
  bool f32(float* v) {
    std::uint32_t bits;
    if (!u32(&bits)) return false;
    std::memcpy(v, &bits, 4);
    return true;
  }
  bool f64(double* v) {
    std::uint64_t bits;
    if (!u64(&bits)) return false;
    std::memcpy(v, &bits, 8);
    return true;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  bool get(int n, std::uint64_t* v) {
    if (remaining() < static_cast<std::size_t>(n)) return false;
    std::uint64_t x = 0;
    for (int i = 0; i < n; ++i) x |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += n;
    *v = x;
    return true;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace statenet::binary
