#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace safear {

/// FNV-1a 64-bit hash; used to fingerprint schemas, configs, and output files.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

std::string hash_hex(std::uint64_t h);

}  // namespace safear
