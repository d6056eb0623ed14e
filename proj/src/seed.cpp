#include "stegnet/seed.hpp"

namespace stegnet {

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t basis) noexcept {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = basis;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) noexcept {
  const std::uint64_t h = fnv1a64(tag.data(), tag.size());
  return splitmix64(splitmix64(base ^ h) + index);
}

}  // namespace stegnet
