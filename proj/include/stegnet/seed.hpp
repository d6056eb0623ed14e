#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace stegnet {

using Rng = std::mt19937_64;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

/// Sub-seed for component `tag` (and optional index) of an experiment
/// seeded with `base`. Distinct tags give unrelated streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index = 0) noexcept;

}  // namespace stegnet
