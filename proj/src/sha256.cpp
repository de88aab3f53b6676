#include "gr1/sha256.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <stdexcept>

namespace gr1 {

namespace {
std::string to_hex(const unsigned char* digest, unsigned int len) {
  static const char* k = "0123456789abcdef";
  std::string out(size_t(len) * 2, '0');
  for (unsigned int i = 0; i < len; ++i) {
    out[2 * i] = k[digest[i] >> 4];
    out[2 * i + 1] = k[digest[i] & 0xf];
  }
  return out;
}
}  // namespace

std::string sha256_hex(const void* data, size_t n) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data, n, digest, &len, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256: digest failed");
  return to_hex(digest, len);
}

std::string sha256_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256: cannot open " + path);
  Sha256Stream s;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    s.update(buf, size_t(in.gcount()));
  }
  return s.hex();
}

Sha256Stream::Sha256Stream() {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || !EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr))
    throw std::runtime_error("sha256: init failed");
  ctx_ = ctx;
}

Sha256Stream::~Sha256Stream() {
  if (ctx_) EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_));
}

void Sha256Stream::update(const void* data, size_t n) {
  if (!EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data, n))
    throw std::runtime_error("sha256: update failed");
}

std::string Sha256Stream::hex() {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), digest, &len))
    throw std::runtime_error("sha256: final failed");
  return to_hex(digest, len);
}

}  // namespace gr1
