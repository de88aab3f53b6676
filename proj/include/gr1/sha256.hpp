#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gr1 {

// Hex-encoded SHA-256 of a byte buffer (OpenSSL-backed).
std::string sha256_hex(const void* data, size_t n);

inline std::string sha256_hex(const std::vector<uint8_t>& v) {
  return sha256_hex(v.data(), v.size());
}
inline std::string sha256_hex(const std::string& s) {
  return sha256_hex(s.data(), s.size());
}

std::string sha256_file_hex(const std::string& path);

// Incremental variant for hashing many arrays into one digest.
class Sha256Stream {
 public:
  Sha256Stream();
  ~Sha256Stream();
  Sha256Stream(const Sha256Stream&) = delete;
  Sha256Stream& operator=(const Sha256Stream&) = delete;
  void update(const void* data, size_t n);
  std::string hex();  // finalizes; stream must not be reused afterwards

 private:
  void* ctx_;
};

}  // namespace gr1
