#pragma once

#include <cstdint>
#include <string_view>
#include <type_traits>

namespace semilab {

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view bytes);

// seed' = splitmix64(seed ^ splitmix64(label)); labels are folded in order
std::uint64_t seed_derive(std::uint64_t root, std::uint64_t label);
std::uint64_t seed_derive(std::uint64_t root, std::string_view label);

template <class First, class... Rest>
std::uint64_t seed_derive(std::uint64_t root, First first, Rest... rest) {
  std::uint64_t s;
  if constexpr (std::is_convertible_v<First, std::string_view>)
    s = seed_derive(root, std::string_view(first));
  else
    s = seed_derive(root, static_cast<std::uint64_t>(first));
  if constexpr (sizeof...(rest) == 0)
    return s;
  else
    return seed_derive(s, rest...);
}

}  // namespace semilab
