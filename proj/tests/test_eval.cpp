#include <cmath>
#include <numeric>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "stegnet/eval.hpp"
#include "stegnet/seed.hpp"

using namespace stegnet;

namespace {

/// Two Gaussian classes in `dim` dimensions, means 0 and `shift` per axis.
FeatureSet gaussian_classes(std::size_t n_per_class, std::size_t dim, double shift, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z(0, 1);
  FeatureSet fs;
  fs.dim = dim;
  for (std::size_t i = 0; i < 2 * n_per_class; ++i) {
    const int label = int(i % 2);
    fs.labels.push_back(label);
    for (std::size_t j = 0; j < dim; ++j) fs.values.push_back(float(z(rng) + (label ? shift : 0.0)));
  }
  return fs;
}

double training_pe(const FldLearner& fl, const FeatureSet& fs) {
  std::vector<int> pred;
  for (std::size_t i = 0; i < fs.size(); ++i) pred.push_back(fl.decide(fs.row(i)));
  return p_error(pred, fs.labels);
}

std::vector<std::size_t> all_features(std::size_t d) {
  std::vector<std::size_t> v(d);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_CASE("p_error") {
  const std::vector<int> truth = {0, 1, 0, 1};
  CHECK(p_error(truth, truth) == 0);
  CHECK(p_error(std::vector<int>{0, 0, 0, 0}, truth) == 0.5);
  CHECK(p_error(std::vector<int>{1, 0, 1, 0}, truth) == 1);
  const Confusion c = confusion(std::vector<int>{1, 1, 0, 0}, truth);
  CHECK(c.false_alarms == 1);
  CHECK(c.missed_detections == 1);
  CHECK_THROWS_AS(p_error(std::vector<int>{0}, truth), ArgumentError);
  // Swapping class names on both sides changes nothing.
  const std::vector<int> pred = {1, 1, 0, 1}, inv_pred = {0, 0, 1, 0}, inv_truth = {1, 0, 1, 0};
  CHECK(p_error(pred, truth) == p_error(inv_pred, inv_truth));
}

TEST_CASE("fld") {
  const FeatureSet sep = gaussian_classes(200, 2, 12.0, 1);
  CHECK(training_pe(fld_fit(sep, all_features(2)), sep) == 0.0);

  const FeatureSet same = gaussian_classes(500, 3, 0.0, 2);
  const double pe = training_pe(fld_fit(same, all_features(3)), same);
  CHECK(pe <= 0.5);
  CHECK(std::abs(pe - 0.5) <= 0.05);

  const FeatureSet one_d = gaussian_classes(20000, 1, 2.0, 3);
  const FldLearner fl = fld_fit(one_d, {0});
  CHECK(fl.w[0] > 0);
  CHECK(std::abs(fl.threshold / fl.w[0] - 1.0) < 0.05);

  FeatureSet single = sep;
  std::fill(single.labels.begin(), single.labels.end(), kCover);
  CHECK_THROWS_AS(fld_fit(single, {0}), ArgumentError);
  CHECK_THROWS_AS(fld_fit(sep, {5}), ArgumentError);

  // Constant features are handled by the regularizer.
  FeatureSet flat = sep;
  for (std::size_t i = 0; i < flat.size(); ++i) flat.values[i * 2 + 1] = 3.0f;
  CHECK(training_pe(fld_fit(flat, all_features(2)), flat) == 0.0);
}

TEST_CASE("ensemble") {
  const FeatureSet train = gaussian_classes(300, 10, 2.0, 4);
  const FeatureSet test = gaussian_classes(300, 10, 2.0, 5);
  CHECK(default_d_sub(10) == 10);
  CHECK(default_d_sub(900) == 240);

  const Ensemble one = ensemble_fit(train, {1, 4, 7});
  for (std::size_t i = 0; i < test.size(); ++i) CHECK(ensemble_predict(one, test.row(i)) == one.learners[0].decide(test.row(i)));

  const Ensemble full = ensemble_fit(train, {51, 10, 7});
  CHECK(p_error(ensemble_predict(full, test), test.labels) <= 0.02);

  const Ensemble a = ensemble_fit(train, {5, 4, 9}), b = ensemble_fit(train, {5, 4, 9});
  for (std::size_t l = 0; l < 5; ++l) CHECK(a.learners[l].subset == b.learners[l].subset);
  CHECK(ensemble_predict(a, test) == ensemble_predict(b, test));

  Ensemble clones = one;
  clones.learners.assign(7, one.learners[0]);
  for (std::size_t i = 0; i < test.size(); ++i) CHECK(ensemble_predict(clones, test.row(i)) == one.learners[0].decide(test.row(i)));

  CHECK_THROWS_AS(ensemble_fit(train, {4, 4, 1}), ArgumentError);
  CHECK_NOTHROW(ensemble_fit(train, {4, 4, 1, true}));
  CHECK_THROWS_AS(ensemble_fit(train, {3, 11, 1}), ArgumentError);

  // Tie votes go to cover.
  Ensemble tie = one;
  FldLearner never = one.learners[0];
  never.threshold = INFINITY;
  FldLearner always = one.learners[0];
  always.threshold = -INFINITY;
  tie.learners = {never, always};
  CHECK(ensemble_predict(tie, test.row(0)) == kCover);
}

TEST_CASE("feature files") {
  const FeatureSet fs = gaussian_classes(3, 4, 1.0, 6);
  const auto bytes = serialize_features(fs);
  CHECK(bytes.size() == 24 + 6 * (1 + 16));
  CHECK(deserialize_features(bytes) == fs);
  auto bad = bytes;
  bad[1] = 'X';
  CHECK_THROWS_AS(deserialize_features(bad), IoError);
  CHECK_THROWS_AS(deserialize_features(std::span(bytes).first(30)), IoError);

  const auto path = (std::filesystem::temp_directory_path() / "stegnet_features.stgf").string();
  save_features(fs, path);
  CHECK(load_features(path) == fs);
  std::filesystem::remove(path);
}

TEST_CASE("extract_features") {
  const NetSpec spec = preset("pibre-cnn", {32, {4, 2}, {8, 8}});
  const Model m = Model::initialized(spec, 1, 0.1);
  const std::size_t flat = flatten_index(spec);
  const SampleSet set = synthetic_pairs(3, 32, 32, 0.25, 2);
  const Tensor x = to_tensor<float>(set.samples[0].image);
  const auto f = extract_features(m, flat, x);
  CHECK(f.size() == 2 * 15 * 15);
  const Tensor act = m.forward_trace({x})[flat + 1][0];
  CHECK(std::equal(f.begin(), f.end(), act.values().begin()));
  CHECK(extract_features(m, flat, x) == f);
  CHECK(extract_features(m, flat - 1, x) == f);  // flatten is a reshape

  for (float v : extract_features(m, 0, Tensor(m.input_shape()))) CHECK(v == 0.0f);
  CHECK_THROWS_AS(extract_features(m, flat + 1, x), ArgumentError);

  const FeatureSet fs = extract_features(m, flat, set);
  CHECK(fs.size() == 6);
  CHECK(std::equal(f.begin(), f.end(), fs.row(0).begin()));
  CHECK(preset("pibre-cnn").layers.size() > 0);
}

TEST_CASE("reports and protocols") {
  EvalReport r;
  r.trials = {{1, 1, 10}, {0, 1, 10}, {2, 2, 10}};
  CHECK(r.p_errors() == std::vector<double>{0.2, 0.1, 0.4});
  CHECK(std::abs(r.average() - (0.2 + 0.1 + 0.4) / 3) < 1e-12);
  CHECK(r.max() == 0.4);
  CHECK(r.min() == 0.1);
  CHECK(r.variance() == doctest::Approx(((0.2 - r.average()) * (0.2 - r.average()) +
                                         (0.1 - r.average()) * (0.1 - r.average()) +
                                         (0.4 - r.average()) * (0.4 - r.average())) / 3));
  CHECK(r.to_csv().rfind("trial,pe,fa,md\n0,", 0) == 0);

  const SampleSet a = synthetic_pairs(12, 8, 8, 0.25, 1, {}, "A");
  const SampleSet b = synthetic_pairs(5, 8, 8, 0.25, 2, {}, "B");
  const Classifier oracle = [](const SampleSet&, const SampleSet& test, std::size_t) { return test.labels(); };
  std::size_t calls = 0;
  const Classifier counting = [&](const SampleSet& train, const SampleSet& test, std::size_t) {
    ++calls;
    CHECK(train.size() == 16);
    return std::vector<int>(test.size(), kCover);
  };

  const EvalReport one = run_protocol({1, 8, 4, 3}, a, nullptr, oracle);
  CHECK(one.trials.size() == 1);
  CHECK(one.average() == 0.0);
  CHECK(one.max() == one.min());
  CHECK(one.variance() == 0.0);
  CHECK(one.tag == "clairvoyant");

  const EvalReport ten = run_protocol({10, 8, 4, 3}, a, nullptr, counting);
  CHECK(calls == 10);
  CHECK(ten.trials.size() == 10);
  const std::string csv = ten.to_csv();
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);

  const EvalReport mm = run_protocol({2, 8, 4, 3}, a, &b, oracle);
  CHECK(mm.tag == "mismatch");
  CHECK(mm.trials[0].total == b.size());
  // Same source on both sides reduces to the clairvoyant protocol.
  const EvalReport same = run_protocol({2, 8, 4, 3}, a, &a, oracle);
  CHECK(same.tag == "clairvoyant");
  CHECK(same.trials[0].total == 8);

  Model m = Model::initialized(preset("pibre-fnn", {32, {}, {4, 4}}), 1);
  m.set_source("A");
  CHECK(evaluate_model(m, synthetic_pairs(2, 32, 32, 0.25, 1, {}, "B")).tag == "mismatch");
  CHECK(evaluate_model(m, synthetic_pairs(2, 32, 32, 0.25, 1, {}, "A")).tag == "clairvoyant");
}
