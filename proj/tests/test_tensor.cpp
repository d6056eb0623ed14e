#include "doctest.h"
#include "oracles.hpp"
#include "stegnet/conv.hpp"

using namespace stegnet;

TEST_CASE("shape and tensor basics") {
  Tensor t(Shape{2, 3, 4});
  CHECK(t.size() == 24);
  CHECK(t.shape().maps() == 2);
  CHECK(t.shape().str() == "2x3x4");
  t.at(1, 2, 3) = 5;
  CHECK(t.data()[23] == 5);
  CHECK_THROWS_AS(Tensor(Shape{1, 2, 3, 4, 5}), ShapeError);
  CHECK_THROWS_AS(Tensor(Shape{2}, std::vector<float>{1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(t.at(2, 0, 0), ShapeError);

  Tensor bad(Shape{2});
  bad[1] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(bad.require_finite("x"), NumericError);
  CHECK(t.reshaped(Shape{24}).shape() == Shape{24});
}

TEST_CASE("out_size") {
  CHECK(out_size(252, 7, 2, 3, SizeMode::ceil) == 127);
  CHECK(out_size(252, 7, 2, 3, SizeMode::floor) == 126);
  CHECK(out_size(131, 5, 1, 0, SizeMode::floor) == 127);
  CHECK(out_size(5, 5, 1, 0, SizeMode::floor) == 1);
  CHECK_THROWS_AS(out_size(3, 5, 1, 0, SizeMode::floor), ShapeError);
  CHECK_THROWS_AS(out_size(5, 5, 0, 0, SizeMode::floor), ShapeError);

  // Stacking two layers composes extents.
  for (std::size_t n = 8; n < 40; ++n) {
    const std::size_t a = out_size(n, 3, 2, 1, SizeMode::ceil);
    const std::size_t b = out_size(a, 3, 1, 0, SizeMode::floor);
    CHECK(b == a - 2);
  }
}

TEST_CASE("pad_zero and crop") {
  Tensor one(Shape{1, 1, 1}, std::vector<float>{7});
  const Tensor p = pad_zero(one, 1);
  CHECK(p.shape() == Shape{1, 3, 3});
  for (std::size_t i = 0; i < 9; ++i) CHECK(p.data()[i] == (i == 4 ? 7.0f : 0.0f));

  std::mt19937_64 rng(3);
  const Tensor big = oracle::random_tensor<float>(Shape{2, 127, 127}, rng);
  const Tensor padded = pad_zero(big, 2);
  CHECK(padded.shape() == Shape{2, 131, 131});
  CHECK(crop(padded, 2, 2, 127, 127) == big);
  CHECK(pad_zero(big, 0) == big);
}

TEST_CASE("conv2d examples") {
  Tensor ones(Shape{2, 3, 3}, 1.0f);
  Tensor k(Shape{2, 1, 1}, 1.0f);
  const Tensor out = conv2d(ones, k, ConvGeometry{{3, 3}, {1, 1}, 1, 0, SizeMode::floor});
  CHECK(out.shape() == Shape{3, 3});
  for (float v : out.values()) CHECK(v == 2.0f);

  const ConvGeometry g{{252, 252}, {7, 7}, 2, 3, SizeMode::ceil};
  CHECK(g.output() == Extent2{127, 127});

  std::mt19937_64 rng(11);
  const Tensor x = oracle::random_tensor<float>(Shape{1, 9, 9}, rng);
  const Tensor zero(Shape{1, 3, 3});
  const Tensor y = conv2d(x, zero, ConvGeometry{{9, 9}, {3, 3}, 1, 1, SizeMode::floor});
  for (float v : y.values()) CHECK(v == 0.0f);
}

TEST_CASE("conv2d matches the nested-loop oracle exactly on inputs up to 8x8") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> ext(1, 8), small(1, 3), mode(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t maps = small(rng), h = ext(rng), w = ext(rng);
    const std::size_t f = std::min({small(rng), h + 2, w + 2});
    const std::size_t stride = small(rng), pad = mode(rng);
    const SizeMode sm = mode(rng) ? SizeMode::ceil : SizeMode::floor;
    if (h + 2 * pad < f || w + 2 * pad < f) continue;
    const ConvGeometry g{{h, w}, {f, f}, stride, pad, sm};
    const TensorD x = oracle::random_tensor<double>(Shape{maps, h, w}, rng);
    const TensorD k = oracle::random_tensor<double>(Shape{1, maps, f, f}, rng);
    const Extent2 o = g.output();
    const TensorD got = conv2d(x, k.reshaped(Shape{maps, f, f}), g);
    // Zero-extension covers ceil-mode trailing windows as well as padding.
    const TensorD want = oracle::conv(x, k, TensorD{}, stride, pad, o.rows, o.cols);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got.data()[i] == want.data()[i]);
  }
}

TEST_CASE("conv2d is linear") {
  std::mt19937_64 rng(8);
  const ConvGeometry g{{8, 8}, {3, 3}, 1, 1, SizeMode::floor};
  const TensorD x = oracle::random_tensor<double>(Shape{2, 8, 8}, rng);
  const TensorD y = oracle::random_tensor<double>(Shape{2, 8, 8}, rng);
  const TensorD k = oracle::random_tensor<double>(Shape{2, 3, 3}, rng);
  TensorD mix(x.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = 2.5 * x.data()[i] - 0.5 * y.data()[i];
  const TensorD a = conv2d(x, k, g), b = conv2d(y, k, g), c = conv2d(mix, k, g);
  for (std::size_t i = 0; i < c.size(); ++i)
    CHECK(c.data()[i] == doctest::Approx(2.5 * a.data()[i] - 0.5 * b.data()[i]).epsilon(1e-12));
}
