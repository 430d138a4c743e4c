#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace webdvfs {

using Rng = std::mt19937_64;

// Stable 64-bit FNV-1a; std::hash is not stable across builds.
constexpr std::uint64_t fnv1a(std::string_view text,
                              std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (const char c : text) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combines a seed with further key material into a new well-mixed seed.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) {
  return splitmix64(seed ^ splitmix64(key));
}

/// Named substream of a root seed ("data-gen", "init", "traces", ...).
constexpr std::uint64_t substream(std::uint64_t root, std::string_view name) {
  return mix_seed(root, fnv1a(name));
}

}  // namespace webdvfs
