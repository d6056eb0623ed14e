#include "stegnet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <string>

#include "stegnet/layers.hpp"
#include "stegnet/model_io.hpp"
#include "stegnet/seed.hpp"

namespace stegnet {

GrayImage::GrayImage(std::size_t w, std::size_t h, std::uint8_t fill) : width(w), height(h), pixels(w * h, fill) {}

// ---------------------------------------------------------------------------
// PGM

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(const std::vector<std::uint8_t>& bytes) : b_(bytes) {}

  /// Skips whitespace and comments, then reads an unsigned decimal.
  std::size_t number() {
    skip_space();
    if (pos_ >= b_.size()) throw IoError(IoErrc::truncated, "PGM header ends early");
    if (!std::isdigit(b_[pos_])) throw IoError(IoErrc::malformed, "PGM header: expected a number");
    std::size_t v = 0;
    while (pos_ < b_.size() && std::isdigit(b_[pos_])) {
      v = v * 10 + (b_[pos_++] - '0');
      if (v > (std::size_t{1} << 32)) throw IoError(IoErrc::malformed, "PGM header: number too large");
    }
    return v;
  }

  /// The single whitespace byte separating maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size()) throw IoError(IoErrc::truncated, "PGM header ends early");
    if (!std::isspace(b_[pos_])) throw IoError(IoErrc::malformed, "PGM header: missing separator");
    return pos_ + 1;
  }

 private:
  void skip_space() {
    while (pos_ < b_.size()) {
      if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else if (std::isspace(b_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 2;
};

}  // namespace

GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw IoError(IoErrc::bad_magic, "not a binary PGM (P5)");
  HeaderReader hr(bytes);
  const std::size_t w = hr.number();
  const std::size_t h = hr.number();
  const std::size_t maxval = hr.number();
  if (w == 0 || h == 0) throw IoError(IoErrc::malformed, "PGM with zero extent");
  if (maxval != 255) throw IoError(IoErrc::unsupported_depth, "PGM maxval " + std::to_string(maxval) + ", need 255");
  const std::size_t start = hr.raster_start();
  if (bytes.size() - std::min(start, bytes.size()) < w * h)
    throw IoError(IoErrc::truncated, "PGM raster shorter than " + std::to_string(w) + "x" + std::to_string(h));
  GrayImage img(w, h);
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(start), w * h, img.pixels.begin());
  return img;
}

GrayImage read_pgm(const std::string& path) {
  try {
    return decode_pgm(detail::read_file(path));
  } catch (const IoError& e) {
    if (e.code() == IoErrc::open_failed) throw;
    throw IoError(e.code(), path + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  return out;
}

void write_pgm(const GrayImage& img, const std::string& path) {
  if (img.pixels.size() != img.width * img.height) throw ArgumentError("image pixel count does not match extents");
  detail::write_file_atomic(path, encode_pgm(img));
}

// ---------------------------------------------------------------------------

std::array<GrayImage, 4> crop_quarters(const GrayImage& img) {
  if (img.width != 512 || img.height != 512)
    throw ArgumentError("crop_quarters needs 512x512, got " + std::to_string(img.width) + "x" +
                        std::to_string(img.height));
  std::array<GrayImage, 4> out;
  for (std::size_t q = 0; q < 4; ++q) {
    const std::size_t r0 = (q / 2) * 256;
    const std::size_t c0 = (q % 2) * 256;
    out[q] = GrayImage(256, 256);
    for (std::size_t r = 0; r < 256; ++r)
      std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>((r0 + r) * 512 + c0), 256,
                  out[q].pixels.begin() + static_cast<std::ptrdiff_t>(r * 256));
  }
  return out;
}

template <typename T>
BasicTensor<T> to_tensor(const GrayImage& img) {
  std::vector<T> v(img.pixels.begin(), img.pixels.end());
  return BasicTensor<T>(Shape{1, img.height, img.width}, std::move(v));
}

template <typename T>
BasicTensor<T> prefilter(const GrayImage& img) {
  if (img.width < 5 || img.height < 5) throw ShapeError("prefilter needs at least 5x5 pixels");
  return high_pass_forward(to_tensor<T>(img));
}

template BasicTensor<float> to_tensor<float>(const GrayImage&);
template BasicTensor<double> to_tensor<double>(const GrayImage&);
template BasicTensor<float> prefilter<float>(const GrayImage&);
template BasicTensor<double> prefilter<double>(const GrayImage&);

// ---------------------------------------------------------------------------

GrayImage lsb_match_embed(const GrayImage& img, double change_rate, std::uint64_t seed) {
  if (!(change_rate > 0.0 && change_rate < 1.0) && change_rate != 1.0)
    throw ArgumentError("change rate must be in (0, 1]");
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GrayImage out = img;
  for (std::uint8_t& p : out.pixels) {
    const bool fire = unit(rng) < change_rate;
    const bool up = unit(rng) < 0.5;
    if (!fire) continue;
    if (p == 0) p = 1;
    else if (p == 255) p = 254;
    else p = static_cast<std::uint8_t>(up ? p + 1 : p - 1);
  }
  return out;
}

GrayImage synthetic_cover(std::size_t width, std::size_t height, std::uint64_t seed,
                          const SyntheticCoverOptions& options) {
  if (width == 0 || height == 0 || options.blur == 0) throw ArgumentError("synthetic cover needs positive extents");
  const std::size_t k = options.blur;
  const std::size_t nw = width + k - 1;
  const std::size_t nh = height + k - 1;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(nw * nh);
  for (double& v : noise) v = normal(rng);

  std::vector<double> smooth(width * height);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) acc += noise[(r + i) * nw + c + j];
      smooth[r * width + c] = acc / static_cast<double>(k * k);
    }
  // A k x k box mean of unit white noise has standard deviation 1/k.
  const double scale = options.contrast * static_cast<double>(k);
  GrayImage img(width, height);
  for (std::size_t i = 0; i < smooth.size(); ++i)
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::round(127.5 + scale * smooth[i]), 0.0, 255.0));
  return img;
}

}  // namespace stegnet
