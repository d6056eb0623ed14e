#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "stegnet/network.hpp"

namespace stegnet {

/// Binary model container, little-endian throughout:
///
///   "STGN" | u32 version | u64 payload size | payload | u64 FNV-1a of payload
///
/// payload = u64 spec size | spec text | u32 block count |
///           per block: u64 value count | f32 values
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize_model(const Model& model);
Model deserialize_model(std::span<const std::uint8_t> bytes);

/// Writes atomically: a failed save leaves no file at `path`.
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

namespace detail {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
std::uint32_t get_u32(const std::uint8_t* p);
std::uint64_t get_u64(const std::uint8_t* p);
float get_f32(const std::uint8_t* p);

std::vector<std::uint8_t> read_file(const std::string& path);
/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace detail

}  // namespace stegnet
