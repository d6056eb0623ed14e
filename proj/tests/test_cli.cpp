#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "stegnet/cli.hpp"
#include "stegnet/dataset.hpp"
#include "stegnet/eval.hpp"
#include "stegnet/image.hpp"
#include "stegnet/model_io.hpp"

using namespace stegnet;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / ("stegnet_cli_" + std::to_string(::getpid()));
  TempDir() { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(run({"--help"}).code == 0);
  CHECK(run({"train", "--help"}).out.find("--epochs") != std::string::npos);
  CHECK(run({}).code != 0);
  const Result r = run({"inspect", "--preset", "pibre-cnn", "--bogus"});
  CHECK(r.code != 0);
  CHECK(r.err.find("bogus") != std::string::npos);
  CHECK(run({"inspect"}).code == 2);
  CHECK(run({"inspect", "--preset", "nope"}).code == 2);
}

TEST_CASE("inspect") {
  const Result r = run({"inspect", "--preset", "pibre-cnn"});
  CHECK(r.code == 0);
  CHECK(r.out.find("64x127x127") != std::string::npos);
  CHECK(r.out.find("conv params 28816") != std::string::npos);
  CHECK(r.out.find("flatten width 258064") != std::string::npos);
  CHECK(run({"inspect", "--preset", "qian-cnn", "--input-size", "32"}).code == 0);
}

TEST_CASE("prepare, train, eval and extract") {
  TempDir dir;
  Result r = run({"prepare", "--synthetic", "12", "32", "32", "--out", dir / "a", "--seed", "3", "-q"});
  REQUIRE(r.code == 0);
  const SampleSet a = load_samples(dir / "a/manifest.tsv");
  CHECK(a.size() == 24);
  CHECK(a.origin == "synthetic");

  r = run({"prepare", "--synthetic", "6", "32", "32", "--blur", "5", "--source", "other", "--out", dir / "b", "-q"});
  REQUIRE(r.code == 0);
  CHECK(load_samples(dir / "b/manifest.tsv").origin == "other");

  r = run({"train", "--manifest", dir / "a/manifest.tsv", "--preset", "pibre-fnn", "--fc-hidden", "8,8", "--epochs",
           "2", "--batch", "8", "--model", dir / "m.stn", "--test-manifest", dir / "b/manifest.tsv", "-q"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("train P_E") != std::string::npos);
  CHECK(r.out.find("test P_E") != std::string::npos);
  CHECK(fs::exists(dir / "m.stn.csv"));
  const Model m = load_model(dir / "m.stn");
  CHECK(m.spec().source == "synthetic");

  r = run({"eval", "--model", dir / "m.stn", "--manifest", dir / "b/manifest.tsv", "--report", dir / "rep"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mismatch") != std::string::npos);
  CHECK(fs::exists(dir / "rep.txt"));
  CHECK(fs::exists(dir / "rep.csv"));

  r = run({"extract", "--model", dir / "m.stn", "--manifest", dir / "b/manifest.tsv", "--out", dir / "f.stgf", "-q"});
  REQUIRE(r.code == 0);
  const FeatureSet fs = load_features(dir / "f.stgf");
  CHECK(fs.size() == 12);
  CHECK(fs.dim == 784);

  r = run({"eval", "--train-manifest", dir / "a/manifest.tsv", "--preset", "pibre-fnn", "--fc-hidden", "8,8",
           "--epochs", "1", "--batch", "8", "--trials", "2", "--train-pairs", "8", "--test-pairs", "4",
           "--classifier", "cut-ensemble", "--learners", "3", "--d-sub", "16", "-q"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("clairvoyant") != std::string::npos);

  // A preset sized for other images is refused before training.
  r = run({"train", "--manifest", dir / "a/manifest.tsv", "--preset", "pibre-fnn", "--input-size", "256", "--epochs",
           "1", "--model", dir / "x.stn", "-q"});
  CHECK(r.code == 1);
  CHECK(r.err.find("32x32") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "x.stn"));
}

TEST_CASE("prepare is deterministic and quarters 512x512 covers") {
  TempDir dir;
  auto bytes = [](const std::string& p) { return detail::read_file(p); };
  REQUIRE(run({"prepare", "--synthetic", "1", "512", "512", "--rate", "0.4", "--seed", "5", "--out", dir / "x", "-q"})
              .code == 0);
  REQUIRE(run({"prepare", "--synthetic", "1", "512", "512", "--rate", "0.4", "--seed", "5", "--out", dir / "y", "-q"})
              .code == 0);
  const Manifest m = read_manifest(dir / "x/manifest.tsv");
  CHECK(m.entries.size() == 4);
  CHECK(bytes(dir / "x/manifest.tsv") == bytes(dir / "y/manifest.tsv"));
  for (const auto& e : m.entries) {
    CHECK(bytes(dir / ("x/" + e.cover)) == bytes(dir / ("y/" + e.cover)));
    CHECK(bytes(dir / ("x/" + e.stego)) == bytes(dir / ("y/" + e.stego)));
  }
  CHECK(read_pgm(dir / ("x/" + m.entries[0].cover)).width == 256);
}

TEST_CASE("eval on the training manifest reproduces the training P_E") {
  TempDir dir;
  REQUIRE(run({"prepare", "--synthetic", "10", "32", "32", "--out", dir / "a", "-q"}).code == 0);
  const Result t = run({"train", "--manifest", dir / "a/manifest.tsv", "--preset", "pibre-fnn", "--fc-hidden", "8,8",
                        "--epochs", "3", "--batch", "4", "--model", dir / "m.stn", "-q"});
  REQUIRE(t.code == 0);
  const double train_pe = std::stod(t.out.substr(t.out.find("train P_E ") + 10));
  const Model m = load_model(dir / "m.stn");
  const EvalReport rep = evaluate_model(m, load_samples(dir / "a/manifest.tsv"));
  CHECK(rep.tag == "clairvoyant");
  CHECK(rep.average() <= train_pe + 1e-9);
}

TEST_CASE("runtime errors") {
  TempDir dir;
  Result r = run({"train", "--manifest", dir / "missing.tsv", "--preset", "pibre-fnn", "--epochs", "1", "--model",
                  dir / "m.stn"});
  CHECK(r.code == 1);
  CHECK(r.err.find("missing.tsv") != std::string::npos);

  fs::create_directories(dir / "empty");
  r = run({"prepare", "--input-dir", dir / "empty", "--out", dir / "out"});
  CHECK(r.code == 2);
  CHECK(r.err.find("no images") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "out"));

  r = run({"prepare", "--synthetic", "2", "8", "8", "--rate", "0", "--out", dir / "out"});
  CHECK(r.code == 2);
}
