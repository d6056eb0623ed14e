#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "stegnet/model_io.hpp"
#include "stegnet/netspec.hpp"
#include "stegnet/network.hpp"

using namespace stegnet;

namespace {

std::size_t conv_index(const NetSpec& spec, std::size_t nth) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (std::holds_alternative<ConvSpec>(spec.layers[i]) && nth-- == 0) return i;
  throw std::logic_error("no such conv layer");
}

}  // namespace

TEST_CASE("pibre-cnn shapes at 256") {
  const NetSpec spec = preset("pibre-cnn");
  const auto shapes = propagate_shapes(spec);
  CHECK(shapes[0] == Shape{1, 252, 252});
  CHECK(shapes[conv_index(spec, 0)] == Shape{64, 127, 127});
  CHECK(shapes[conv_index(spec, 1) - 1] == Shape{64, 131, 131});
  CHECK(shapes[conv_index(spec, 1)] == Shape{16, 127, 127});
  CHECK(shapes[flatten_index(spec)] == Shape{258064});
  CHECK(shapes.back() == Shape{2});

  const ParamCount pc = count_params(spec);
  CHECK(pc.conv_total == 28816);
  CHECK(pc.total == 259096816);
  CHECK(std::abs(double(pc.total) - 259.07e6) < 0.05e6);
}

TEST_CASE("qian-cnn counts") {
  const NetSpec spec = preset("qian-cnn");
  CHECK(propagate_shapes(spec)[conv_index(spec, 0)] == Shape{16, 248, 248});
  // After the first pooling layer.
  CHECK(propagate_shapes(spec)[conv_index(spec, 1) - 1] == Shape{16, 124, 124});
  const ParamCount pc = count_params(spec);
  CHECK(pc.conv_total == 13792);
  CHECK(pc.total == 63456);
  const OpCount oc = count_ops(spec);
  CHECK(oc.coarse_estimate == 731566080ULL);
  CHECK(oc.coarse_estimate == 5ULL * 16 * 252 * 252 * (3 * 3 * 16));
}

TEST_CASE("pibre-fnn and desk variants") {
  const ParamCount fnn = count_params(preset("pibre-fnn"));
  CHECK(std::abs(double(fnn.total) - 129.0e6) < 0.2e6);
  for (const auto& name : preset_names()) {
    const NetSpec desk = preset(name, {32, {}, {}});
    CHECK_NOTHROW(validate(desk));
    CHECK(propagate_shapes(desk).back() == Shape{2});
  }
  PresetOptions shrink{32, {8, 4}, {64, 64}};
  const NetSpec small = preset("pibre-cnn", shrink);
  CHECK(propagate_shapes(small)[flatten_index(small)] == Shape{4 * 15 * 15});
  CHECK_THROWS_AS(preset("lenet"), ArgumentError);
  CHECK_THROWS_AS(preset("pibre-cnn", {64, {}, {}}), ArgumentError);
}

TEST_CASE("counting formulas on single layers") {
  NetSpec one;
  one.input = {1, 3, 3};
  one.layers = {ConvSpec{1, 3}};
  CHECK(count_params(one).total == 10);
  one.input = {1, 1, 1};
  one.layers = {ConvSpec{1, 1}};
  CHECK(count_ops(one).conv_total == 2);
  one.input = {3, 5, 5};
  one.layers = {ConvSpec{4, 3}};
  const auto a = count_ops(one).layers[0].ops;
  one.layers = {ConvSpec{8, 3}};
  CHECK(count_ops(one).layers[0].ops == 2 * a);
}

TEST_CASE("structural validation") {
  NetSpec spec = preset("pibre-cnn", {32, {}, {}});
  spec.layers.pop_back();
  CHECK_THROWS_AS(validate(spec), ShapeError);
  NetSpec tiny;
  tiny.input = {1, 4, 4};
  tiny.layers = {ConvSpec{1, 7}};
  try {
    propagate_shapes(tiny);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
  }
  CHECK_NOTHROW(propagate_shapes(prefix(preset("pibre-cnn", {32, {}, {}}), 3)));
}

TEST_CASE("architecture text round trip") {
  for (const auto& name : preset_names()) {
    NetSpec spec = preset(name, {32, {}, {}});
    spec.source = "boss";
    CHECK(parse_netspec(to_text(spec)) == spec);
  }
  const std::string text =
      "# toy\nname toy\ninput maps=1 rows=8 cols=8\nhpf\nconv filters=2 kernel=3 stride=1 pad=1 mode=floor\n"
      "act kind=gaussian sigma=0.5 literal=0\npool kind=average window=2 stride=2 pad=0 mode=ceil\n"
      "flatten\nfc out=2 bias=0\nsoftmax\n";
  const NetSpec toy = parse_netspec(text);
  CHECK(toy.layers.size() == 7);
  CHECK_NOTHROW(validate(toy));
  CHECK_THROWS_AS(parse_netspec("input maps=1 rows=8 cols=8\nconv filters=2 kernel=3 bogus=1\n"), IoError);
  CHECK_THROWS_AS(parse_netspec("input maps=1 rows=8 cols=8\nwarp\n"), IoError);
}

TEST_CASE("model file round trip and error kinds") {
  const NetSpec spec = preset("qian-cnn", {32, {}, {}});
  Model m = Model::initialized(spec, 42);
  m.set_source("synthetic");
  const auto bytes = serialize_model(m);
  const Model back = deserialize_model(bytes);
  CHECK(back.spec() == m.spec());
  for (std::size_t b = 0; b < m.num_blocks(); ++b) CHECK(back.block(b) == m.block(b));
  std::mt19937_64 rng(1);
  const Tensor x = oracle::random_tensor<float>(m.input_shape(), rng, 0, 255);
  CHECK(back.forward(x) == m.forward(x));

  auto code = [](std::span<const std::uint8_t> b) {
    try {
      deserialize_model(b);
    } catch (const IoError& e) {
      return e.code();
    }
    return IoErrc::open_failed;
  };
  CHECK(code({}) == IoErrc::truncated);
  CHECK(code(std::span(bytes).first(bytes.size() - 3)) == IoErrc::truncated);
  auto flipped = bytes;
  flipped[40] ^= 0x10;
  CHECK(code(flipped) == IoErrc::checksum_mismatch);
  auto magic = bytes;
  magic[0] = 'X';
  CHECK(code(magic) == IoErrc::bad_magic);
  auto version = bytes;
  version[4] = 9;
  CHECK(code(version) == IoErrc::version_mismatch);

  const auto dir = std::filesystem::temp_directory_path() / "stegnet_model_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.stgn").string();
  save_model(m, path);
  CHECK(serialize_model(load_model(path)) == bytes);
  std::ofstream(path, std::ios::trunc).close();
  CHECK_THROWS_AS(load_model(path), IoError);
  CHECK_THROWS_AS(load_model((dir / "missing.stgn").string()), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("network forward matches layer-by-layer composition") {
  const NetSpec spec = preset("pibre-cnn", {32, {4, 2}, {8, 8}});
  const Model m = Model::initialized(spec, 3, 0.1);
  std::mt19937_64 rng(2);
  const Tensor x = oracle::random_tensor<float>(m.input_shape(), rng, 0, 255);
  const auto trace = m.forward_trace({x});
  CHECK(trace.size() == spec.layers.size() + 1);
  CHECK(trace.back()[0] == m.forward(x));
  CHECK(m.forward(x, flatten_index(spec)) == trace[flatten_index(spec)][0]);
  CHECK(m.param_count() == count_params(spec).total);
}
