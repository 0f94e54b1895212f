#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace scis {

/// Incremental SHA-256 over a canonical little-endian byte stream.
class ContentHasher {
 public:
  ContentHasher& add(std::string_view text);
  ContentHasher& add(std::uint64_t value);
  ContentHasher& add(double value);
  ContentHasher& add(std::span<const double> values);
  /// Lowercase hex digest of everything added so far.
  std::string hex() const;

 private:
  std::vector<unsigned char> bytes_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace scis
