#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace eaaslab {

// SHA-256 hex digest (OpenSSL-backed). Used for manifest/artifact identity.
std::string sha256_hex(const void* data, size_t len);
std::string sha256_hex(const std::string& s);

// Incremental variant for hashing large artifacts without copies.
class DigestStream {
 public:
  DigestStream();
  ~DigestStream();
  DigestStream(const DigestStream&) = delete;
  DigestStream& operator=(const DigestStream&) = delete;
  void update(const void* data, size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  template <class T>
  void update_pod(const T& v) {
    update(&v, sizeof(T));
  }
  std::string hex();  // finalizes; stream must not be reused afterwards

 private:
  void* ctx_;
};

}  // namespace eaaslab
