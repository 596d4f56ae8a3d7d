#pragma once

#include <cstdint>
#include <string_view>

namespace dreampipe {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ull;
  }
  return h;
}

// Independent per-stage seed from a master seed and a stage label.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view label) noexcept {
  return splitmix64(master ^ splitmix64(fnv1a64(label)));
}

// Stateless hash to [0,1) for per-pixel noise.
constexpr double hash_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) noexcept {
  const std::uint64_t h = splitmix64(seed ^ splitmix64(a * 0x9E3779B97F4A7C15ull + b));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace dreampipe
