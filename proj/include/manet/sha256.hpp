#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace manet {

// Incremental SHA-256 over raw bytes (OpenSSL EVP under the hood).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update_u32(uint32_t v);  // little-endian
  void update_f32(const float* data, size_t count);

  std::string hex();  // finalizes; the object must not be reused afterwards

 private:
  void* ctx_;
};

std::string sha256_hex(const void* data, size_t len);
std::string sha256_file(const std::string& path);  // throws if unreadable

}  // namespace manet
