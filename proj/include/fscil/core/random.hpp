#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace fscil {

using Rng = std::mt19937_64;

// splitmix64 finalizer; fans one master seed out into independent streams.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return mix_seed(master ^ mix_seed(h));
}

}  // namespace fscil
