#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace benchsynth {

// Lower-case hex SHA-256 of the input bytes.
std::string sha256_hex(std::string_view data);

// 64-bit FNV-1a; stable across platforms, used for seeding and bucketing.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t basis = 0xcbf29ce484222325ULL);

// SplitMix64 finalizer. Mixes a 64-bit state into a well-distributed value.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a master seed and a stream index.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

}  // namespace benchsynth
