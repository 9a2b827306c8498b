#include "eaaslab/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace eaaslab {

static std::string to_hex(const unsigned char* buf, unsigned int len) {
  static const char* kHex = "0123456789abcdef";
  std::string out(len * 2, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = kHex[buf[i] >> 4];
    out[2 * i + 1] = kHex[buf[i] & 0xf];
  }
  return out;
}

std::string sha256_hex(const void* data, size_t len) {
  unsigned char buf[EVP_MAX_MD_SIZE];
  unsigned int out_len = 0;
  if (!EVP_Digest(data, len, buf, &out_len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 failed");
  return to_hex(buf, out_len);
}

std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

DigestStream::DigestStream() {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || !EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256 init failed");
  ctx_ = ctx;
}

DigestStream::~DigestStream() {
  if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void DigestStream::update(const void* data, size_t len) {
  if (!EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, len))
    throw std::runtime_error("sha256 update failed");
}

std::string DigestStream::hex() {
  unsigned char buf[EVP_MAX_MD_SIZE];
  unsigned int out_len = 0;
  if (!EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), buf, &out_len))
    throw std::runtime_error("sha256 final failed");
  return to_hex(buf, out_len);
}

}  // namespace eaaslab
