#include "scis/hash.hpp"

#include <bit>
#include <cstdio>

#include <openssl/sha.h>

namespace scis {

ContentHasher& ContentHasher::add(std::string_view text) {
  add(static_cast<std::uint64_t>(text.size()));
  bytes_.insert(bytes_.end(), text.begin(), text.end());
  return *this;
}

ContentHasher& ContentHasher::add(std::uint64_t value) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<unsigned char>(value >> (8 * i)));
  return *this;
}

ContentHasher& ContentHasher::add(double value) {
  return add(std::bit_cast<std::uint64_t>(value));
}

ContentHasher& ContentHasher::add(std::span<const double> values) {
  add(static_cast<std::uint64_t>(values.size()));
  for (double v : values) add(v);
  return *this;
}

std::string ContentHasher::hex() const {
  return sha256_hex(std::string_view(reinterpret_cast<const char*>(bytes_.data()), bytes_.size()));
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  char buf[3];
  for (unsigned char b : digest) {
    std::snprintf(buf, sizeof buf, "%02x", b);
    out += buf;
  }
  return out;
}

}  // namespace scis
