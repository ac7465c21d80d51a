#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string_view>

namespace symcor {

// Incremental FNV-1a (64-bit). Stable across platforms; used to fingerprint
// programs, configs and reports so runs can assert reproducibility cheaply.
class Digest {
 public:
  void bytes(const void* data, size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }

  void u64(uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(buf, 8);
  }

  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }

  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }

  uint64_t value() const { return h_; }

 private:
  uint64_t h_ = 0xcbf29ce484222325ULL;
};

}  // namespace symcor
