#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "stegnet/dataset.hpp"
#include "stegnet/metrics.hpp"
#include "stegnet/network.hpp"
#include "stegnet/training.hpp"

namespace stegnet {

// ---------------------------------------------------------------------------
// Cut-network features.

/// Output of layers [0, cut_after] for one input, flattened map-major then
/// row-major. The cut must be at or before the flatten layer.
std::vector<float> extract_features(const Model& model, std::size_t cut_after, const Tensor& input);

/// Features of every sample, row-major [n x dim], with labels.
struct FeatureSet {
  std::size_t dim = 0;
  std::vector<float> values;
  std::vector<int> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  friend bool operator==(const FeatureSet&, const FeatureSet&) = default;
};

FeatureSet extract_features(const Model& model, std::size_t cut_after, const SampleSet& set,
                            std::size_t batch = 64);

/// "STGF" | u32 version | u64 count | u64 dim | per sample: u8 label, dim x f32.
inline constexpr std::uint32_t kFeatureFormatVersion = 1;
std::vector<std::uint8_t> serialize_features(const FeatureSet& fs);
FeatureSet deserialize_features(std::span<const std::uint8_t> bytes);
void save_features(const FeatureSet& fs, const std::string& path);
FeatureSet load_features(const std::string& path);

// ---------------------------------------------------------------------------
// Fisher linear discriminant and its random-subspace ensemble.

struct FldLearner {
  std::vector<std::size_t> subset;
  std::vector<double> w;
  double threshold = 0;

  double score(std::span<const float> x) const;
  /// Stego when the projection exceeds the threshold.
  int decide(std::span<const float> x) const { return score(x) > threshold ? kStego : kCover; }
};

/// w = (S_w + lambda I)^-1 (mu_stego - mu_cover) over the subset's columns,
/// S_w the pooled within-class scatter. `lambda` <= 0 selects
/// 1e-6 * trace(S_w) / d. The threshold minimizes training (FA + MD) / N;
/// among equally good cut points the middle one is taken, placed halfway
/// between its neighboring scores.
FldLearner fld_fit(const FeatureSet& fs, std::vector<std::size_t> subset, double lambda = 0);

struct Ensemble {
  std::vector<FldLearner> learners;
  std::size_t d_sub = 0;
  std::uint64_t seed = 0;
};

struct EnsembleOptions {
  std::size_t learners = 51;
  /// 0 selects ceil(sqrt(dim)) * 8, capped at dim.
  std::size_t d_sub = 0;
  std::uint64_t seed = 0;
  /// Even ensembles can tie; ties are decided as cover.
  bool allow_even = false;
};

std::size_t default_d_sub(std::size_t dim);

/// Learner l uses d_sub distinct features drawn with derive_seed(seed, "subspace", l).
Ensemble ensemble_fit(const FeatureSet& fs, const EnsembleOptions& options = {});
/// Majority vote; ties go to cover.
int ensemble_predict(const Ensemble& ens, std::span<const float> x);
std::vector<int> ensemble_predict(const Ensemble& ens, const FeatureSet& fs);

// ---------------------------------------------------------------------------
// Reports and protocols.

struct EvalReport {
  /// "clairvoyant" (test data from the training source) or "mismatch".
  std::string tag;
  std::string train_source;
  std::string test_source;
  std::vector<Confusion> trials;

  std::vector<double> p_errors() const;
  double max() const;
  double min() const;
  double average() const;
  /// Population variance of the per-trial P_E.
  double variance() const;

  std::string to_text() const;
  /// trial,pe,fa,md
  std::string to_csv() const;
};

std::string protocol_tag(const std::string& train_source, const std::string& test_source);

/// Single-trial report for a trained model on `test`, tagged by comparing
/// the model's recorded source with the set's origin.
EvalReport evaluate_model(const Model& model, const SampleSet& test);

/// Trains on `train` and returns predictions for every sample of `test`.
using Classifier =
    std::function<std::vector<int>(const SampleSet& train, const SampleSet& test, std::size_t trial)>;

struct ProtocolConfig {
  std::size_t trials = 10;
  std::size_t train_pairs = 0;
  /// Clairvoyant only; a mismatch run tests on the whole test source.
  std::size_t test_pairs = 0;
  std::uint64_t seed = 0;
};

/// Trial t splits the training source with derive_seed(seed, "trial", t).
/// With `test_source` null or of the same origin as `train_source` the test
/// half of that split is used (clairvoyant); otherwise the entire test
/// source is (mismatch).
EvalReport run_protocol(const ProtocolConfig& config, const SampleSet& train_source, const SampleSet* test_source,
                        const Classifier& classifier);

/// Fresh network per trial, initialized from derive_seed(seed, "init", trial)
/// and trained with `cfg` (shuffle seed also per trial).
Classifier cnn_classifier(NetSpec spec, TrainConfig cfg, std::uint64_t seed);

/// Trains the network as cnn_classifier does, then fits an ensemble on its
/// features cut after layer `cut_after`.
Classifier cut_ensemble_classifier(NetSpec spec, TrainConfig cfg, std::size_t cut_after, EnsembleOptions ens,
                                   std::uint64_t seed);

}  // namespace stegnet
