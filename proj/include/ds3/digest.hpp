#pragma once

#include <openssl/evp.h>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>

#include "ds3/common.hpp"

namespace ds3 {

// Thin wrapper over the EVP digest interface; hex output, lowercase.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1)
      throw numeric_error("sha256: init failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx_, data, n) != 1)
      throw numeric_error("sha256: update failed");
  }
  void update(const std::string& s) { update(s.data(), s.size()); }

  std::string hex() {
    unsigned char out[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_, out, &len) != 1)
      throw numeric_error("sha256: final failed");
    static const char* digits = "0123456789abcdef";
    std::string h;
    h.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
      h.push_back(digits[out[i] >> 4]);
      h.push_back(digits[out[i] & 0xf]);
    }
    return h;
  }

 private:
  EVP_MD_CTX* ctx_;
};

inline std::string sha256_hex(const void* data, std::size_t n) {
  Sha256 d;
  d.update(data, n);
  return d.hex();
}

inline std::string sha256_hex(const std::string& s) {
  return sha256_hex(s.data(), s.size());
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("sha256: cannot open " + path);
  Sha256 d;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    std::streamsize got = in.gcount();
    if (got > 0) d.update(buf, std::size_t(got));
  }
  if (in.bad()) throw io_error("sha256: read error on " + path);
  return d.hex();
}

}  // namespace ds3
