#include "driveval/rng.hpp"

namespace driveval {

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index) {
  std::uint64_t h = mix64(master ^ 0x5bd1e9955bd1e995ULL);
  h = mix64(h ^ fnv1a(component));
  return mix64(h + 0x9e3779b97f4a7c15ULL * (index + 1));
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view component,
                          std::uint64_t index, std::uint64_t sub_index) {
  return mix64(derive_seed(master, component, index) ^
               (0xd6e8feb86659fd93ULL * (sub_index + 1)));
}

}  // namespace driveval
