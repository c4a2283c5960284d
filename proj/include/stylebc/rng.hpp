#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stylebc {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent sub-seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b + 0x632BE59BD9B4E019ULL));
}

/// Stage-name variant: hash(master_seed, stage_name, index).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage, std::uint64_t index = 0) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a over the stage name
  for (char c : stage) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return derive_seed(seed, h, index);
}

}  // namespace stylebc
