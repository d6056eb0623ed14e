#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "stegnet/tensor.hpp"

namespace stegnet {

/// 8-bit grayscale image, row-major.
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(std::size_t w, std::size_t h, std::uint8_t fill = 0);

  std::uint8_t& at(std::size_t row, std::size_t col) { return pixels[row * width + col]; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return pixels[row * width + col]; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

/// Binary PGM ("P5", maxval 255). Comments are accepted on read.
GrayImage read_pgm(const std::string& path);
GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);
void write_pgm(const GrayImage& img, const std::string& path);

/// Non-overlapping 256x256 quadrants of a 512x512 image: TL, TR, BL, BR.
std::array<GrayImage, 4> crop_quarters(const GrayImage& img);

/// Pixel values as a [1, height, width] tensor.
template <typename T = float>
BasicTensor<T> to_tensor(const GrayImage& img);

/// Valid cross-correlation with the 5x5 high-pass kernel; [1, h-4, w-4],
/// signed and unclamped.
template <typename T = float>
BasicTensor<T> prefilter(const GrayImage& img);

/// +-1 embedding simulator: every pixel independently changes with
/// probability `change_rate`, sign equiprobable, except that 0 always
/// moves up and 255 always moves down.
GrayImage lsb_match_embed(const GrayImage& img, double change_rate, std::uint64_t seed);

/// Seeded synthetic cover: white Gaussian noise smoothed by a `blur` x `blur`
/// box filter, standardized, then mapped to 127.5 + contrast * z, rounded
/// and clamped to [0, 255].
struct SyntheticCoverOptions {
  std::size_t blur = 3;
  double contrast = 6.0;
};

GrayImage synthetic_cover(std::size_t width, std::size_t height, std::uint64_t seed,
                          const SyntheticCoverOptions& options = {});

}  // namespace stegnet
