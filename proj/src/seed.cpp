#include "semilab/seed.hpp"

namespace semilab {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t seed_derive(std::uint64_t root, std::uint64_t label) {
  return splitmix64(root ^ splitmix64(label));
}

std::uint64_t seed_derive(std::uint64_t root, std::string_view label) {
  return seed_derive(root, fnv1a64(label) ^ 0x5eed5eed5eed5eedULL);
}

}  // namespace semilab
