#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <unistd.h>

#include "doctest.h"
#include "stegnet/dataset.hpp"
#include "stegnet/image.hpp"
#include "stegnet/model_io.hpp"
#include "stegnet/seed.hpp"

using namespace stegnet;
namespace fs = std::filesystem;

namespace {

GrayImage random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> px(0, 255);
  GrayImage img(w, h);
  for (auto& p : img.pixels) p = std::uint8_t(px(rng));
  return img;
}

IoErrc decode_error(const std::string& text) {
  try {
    decode_pgm(std::vector<std::uint8_t>(text.begin(), text.end()));
  } catch (const IoError& e) {
    return e.code();
  }
  return IoErrc::open_failed;
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("stegnet_test_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("pgm") {
  TempDir dir;
  const GrayImage img = random_image(16, 16, 1);
  write_pgm(img, (dir.path / "a.pgm").string());
  CHECK(read_pgm((dir.path / "a.pgm").string()) == img);

  const std::string with_comment = "P5\n# made by hand\n2 1\n255\n\x07\x08";
  CHECK(decode_pgm(std::vector<std::uint8_t>(with_comment.begin(), with_comment.end())).pixels ==
        std::vector<std::uint8_t>{7, 8});
  CHECK(decode_error("P6\n2 1\n255\nab") == IoErrc::bad_magic);
  CHECK(decode_error("P5\n2 1\n65535\nabcd") == IoErrc::unsupported_depth);
  CHECK(decode_error("P5\n2 2\n255\nab") == IoErrc::truncated);
  CHECK_THROWS_AS(read_pgm((dir.path / "none.pgm").string()), IoError);
}

TEST_CASE("crop_quarters") {
  GrayImage img(512, 512);
  for (std::size_t r = 0; r < 512; ++r)
    for (std::size_t c = 0; c < 512; ++c) img.at(r, c) = std::uint8_t(10 * (2 * (r / 256) + c / 256) + (r + c) % 3);
  const auto q = crop_quarters(img);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(q[k].width == 256);
    const double mean = std::accumulate(q[k].pixels.begin(), q[k].pixels.end(), 0.0) / (256.0 * 256.0);
    CHECK(mean == doctest::Approx(10.0 * k + 1).epsilon(0.01));
  }
  GrayImage back(512, 512);
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t r = 0; r < 256; ++r)
      for (std::size_t c = 0; c < 256; ++c) back.at((k / 2) * 256 + r, (k % 2) * 256 + c) = q[k].at(r, c);
  CHECK(back == img);
  const auto flat = crop_quarters(GrayImage(512, 512, 9));
  for (const auto& quarter : flat) CHECK(quarter == GrayImage(256, 256, 9));
  CHECK_THROWS_AS(crop_quarters(GrayImage(256, 256)), ArgumentError);
}

TEST_CASE("prefilter") {
  const TensorD flat = prefilter<double>(GrayImage(9, 7, 77));
  for (double v : flat.values()) CHECK(std::abs(v) < 1e-12);
  CHECK(prefilter<float>(GrayImage(256, 256)).shape() == Shape{1, 252, 252});
  CHECK_THROWS_AS(prefilter<float>(GrayImage(4, 8)), ShapeError);

  // Translation equivariance away from borders.
  const GrayImage a = random_image(12, 12, 4);
  GrayImage b(12, 12);
  for (std::size_t r = 0; r < 12; ++r)
    for (std::size_t c = 1; c < 12; ++c) b.at(r, c) = a.at(r, c - 1);
  const TensorD fa = prefilter<double>(a), fb = prefilter<double>(b);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 1; c < 8; ++c) CHECK(fb.at(0, r, c) == doctest::Approx(fa.at(0, r, c - 1)));
}

TEST_CASE("lsb matching") {
  const GrayImage img = random_image(256, 256, 2);
  CHECK(lsb_match_embed(img, 1e-9, 5) == img);
  CHECK(lsb_match_embed(GrayImage(8, 8, 0), 1.0, 5) == GrayImage(8, 8, 1));
  CHECK(lsb_match_embed(GrayImage(8, 8, 255), 1.0, 5) == GrayImage(8, 8, 254));
  const GrayImage s = lsb_match_embed(img, 0.4, 9);
  CHECK(s == lsb_match_embed(img, 0.4, 9));
  std::size_t changed = 0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const int d = int(s.pixels[i]) - int(img.pixels[i]);
    CHECK(std::abs(d) <= 1);
    changed += d != 0;
  }
  CHECK(std::abs(double(changed) / double(img.pixels.size()) - 0.4) < 0.01);
  CHECK_THROWS_AS(lsb_match_embed(img, 0.0, 1), ArgumentError);
  CHECK_THROWS_AS(lsb_match_embed(img, 1.5, 1), ArgumentError);
}

TEST_CASE("synthetic covers and pairs") {
  CHECK(synthetic_cover(32, 32, 7) == synthetic_cover(32, 32, 7));
  CHECK_FALSE(synthetic_cover(32, 32, 7) == synthetic_cover(32, 32, 8));
  const SampleSet set = synthetic_pairs(10, 16, 16, 0.25, 3);
  CHECK(set.size() == 20);
  CHECK(set.pair_complete());
  CHECK(set.origin == "synthetic");
}

TEST_CASE("splits") {
  const SampleSet set = synthetic_pairs(10, 8, 8, 0.25, 1);
  const Split sp = make_splits(set, 6, 2, 4);
  CHECK(sp.train.size() == 12);
  CHECK(sp.test.size() == 4);
  CHECK(sp.train.pair_complete());
  CHECK(sp.test.pair_complete());
  const auto tr = sp.train.pair_ids(), te = sp.test.pair_ids();
  const std::set<std::int64_t> train_ids(tr.begin(), tr.end());
  for (auto id : te) CHECK(train_ids.count(id) == 0);
  const auto labels = sp.train.labels();
  CHECK(std::count(labels.begin(), labels.end(), kStego) == 6);
  const Split again = make_splits(set, 6, 2, 4);
  CHECK(again.train.pair_ids() == tr);
  CHECK_THROWS_AS(make_splits(set, 9, 2, 4), ArgumentError);
}

TEST_CASE("manifest") {
  TempDir dir;
  Manifest m;
  m.source = "boss";
  m.entries = {{0, "c0.pgm", "s0.pgm"}, {1, "c1.pgm", "s1.pgm"}};
  const std::string path = (dir.path / "set.tsv").string();
  write_manifest(m, path);
  const Manifest back = read_manifest(path);
  CHECK(back.source == "boss");
  CHECK(back.entries == m.entries);
  for (const auto& e : m.entries) {
    write_pgm(random_image(8, 8, std::uint64_t(e.pair_id)), (dir.path / e.cover).string());
    write_pgm(random_image(8, 8, 100 + std::uint64_t(e.pair_id)), (dir.path / e.stego).string());
  }
  const SampleSet set = load_samples(path);
  CHECK(set.origin == "boss");
  CHECK(set.size() == 4);
  CHECK(set.pair_complete());

  m.source.clear();
  write_manifest(m, (dir.path / "lirmm.tsv").string());
  CHECK(load_samples((dir.path / "lirmm.tsv").string()).origin == "lirmm");

  std::ofstream((dir.path / "bad.tsv").string()) << "0\tonly-two-fields\n";
  CHECK_THROWS_AS(read_manifest((dir.path / "bad.tsv").string()), IoError);
}
