#include "stegnet/model_io.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>

#include "stegnet/seed.hpp"

namespace stegnet {

namespace detail {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

std::uint32_t get_u32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_u32(p)); }

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::open_failed, path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes) {
  const std::string tmp = path + ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrc::open_failed, tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw IoError(IoErrc::open_failed, "write failed: " + path);
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError(IoErrc::open_failed, "cannot rename into " + path + ": " + ec.message());
  }
}

}  // namespace detail

namespace {
constexpr char kMagic[4] = {'S', 'T', 'G', 'N'};
constexpr std::size_t kHeader = 16;
constexpr std::size_t kTrailer = 8;
}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
  std::vector<std::uint8_t> payload;
  const std::string spec = to_text(model.spec());
  detail::put_u64(payload, spec.size());
  payload.insert(payload.end(), spec.begin(), spec.end());
  detail::put_u32(payload, static_cast<std::uint32_t>(model.num_blocks()));
  for (std::size_t i = 0; i < model.num_blocks(); ++i) {
    const Tensor& t = model.block(i);
    detail::put_u64(payload, t.size());
    for (const float v : t.values()) detail::put_f32(payload, v);
  }

  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  detail::put_u32(out, kModelFormatVersion);
  detail::put_u64(out, payload.size());
  out.insert(out.end(), payload.begin(), payload.end());
  detail::put_u64(out, fnv1a64(payload.data(), payload.size()));
  return out;
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw IoError(IoErrc::truncated, "model file shorter than its magic");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw IoError(IoErrc::bad_magic, "not a STGN model file");
  if (bytes.size() < kHeader + kTrailer) throw IoError(IoErrc::truncated, "model header incomplete");
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kModelFormatVersion)
    throw IoError(IoErrc::version_mismatch,
                  "model format " + std::to_string(version) + ", expected " + std::to_string(kModelFormatVersion));
  const std::uint64_t size = detail::get_u64(bytes.data() + 8);
  if (size > bytes.size() - kHeader - kTrailer)
    throw IoError(IoErrc::truncated, "payload of " + std::to_string(size) + " bytes does not fit the file");
  if (size != bytes.size() - kHeader - kTrailer) throw IoError(IoErrc::malformed, "trailing bytes after model");
  const std::uint8_t* payload = bytes.data() + kHeader;
  if (fnv1a64(payload, size) != detail::get_u64(payload + size))
    throw IoError(IoErrc::checksum_mismatch, "model payload checksum differs");

  std::size_t pos = 0;
  auto need = [&](std::uint64_t n) {
    if (n > size - pos) throw IoError(IoErrc::malformed, "model payload ends early");
  };
  need(8);
  const std::uint64_t spec_len = detail::get_u64(payload + pos);
  pos += 8;
  need(spec_len);
  const std::string text(reinterpret_cast<const char*>(payload + pos), spec_len);
  pos += spec_len;
  Model model(parse_netspec(text));

  need(4);
  const std::uint32_t blocks = detail::get_u32(payload + pos);
  pos += 4;
  if (blocks != model.num_blocks())
    throw IoError(IoErrc::malformed, "model has " + std::to_string(blocks) + " parameter blocks, spec needs " +
                                         std::to_string(model.num_blocks()));
  for (std::size_t b = 0; b < blocks; ++b) {
    need(8);
    const std::uint64_t count = detail::get_u64(payload + pos);
    pos += 8;
    Tensor& t = model.block(b);
    if (count != t.size()) throw IoError(IoErrc::malformed, "block " + std::to_string(b) + " has the wrong size");
    need(count * 4);
    for (std::size_t i = 0; i < count; ++i, pos += 4) t.data()[i] = detail::get_f32(payload + pos);
  }
  if (pos != size) throw IoError(IoErrc::malformed, "unused bytes in model payload");
  return model;
}

void save_model(const Model& model, const std::string& path) {
  detail::write_file_atomic(path, serialize_model(model));
}

Model load_model(const std::string& path) { return deserialize_model(detail::read_file(path)); }

}  // namespace stegnet
