#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stegnet/dataset.hpp"
#include "stegnet/network.hpp"

namespace stegnet {

/// Mini-batch momentum SGD settings. Defaults are the reference
/// hyperparameters: batch 128, momentum 0.9, learning rate 0.001 for
/// weights and 0.002 for biases, weight decay 0.004 on conv weights and
/// 0.01 on fc weights, no dropout.
struct TrainConfig {
  std::size_t batch_size = 128;
  double momentum = 0.9;
  double lr_weights = 0.001;
  double lr_bias = 0.002;
  double wd_conv = 0.004;
  double wd_fc = 0.01;
  std::size_t epochs = 100;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

/// One velocity buffer per parameter block, zero-initialized.
template <typename T>
struct OptimizerState {
  std::vector<BasicTensor<T>> velocity;

  static OptimizerState zeros_like(const Network<T>& net);
};

struct LossRecord {
  std::size_t epoch = 0;
  double mean_loss = 0;
  double train_pe = 0;
  std::optional<double> test_pe;
};

struct LossValue {
  double loss = 0;
  std::array<double, 2> grad{};  // d loss / d outputs
};

/// Squared error of the two softmax outputs against the one-hot target
/// (1 - label, label).
LossValue loss_mse(std::span<const double> outputs, int label);

/// Inputs of a batch for the network: pixel tensors [1, H, W].
template <typename T>
std::vector<BasicTensor<T>> batch_inputs(const SampleSet& set, std::span<const std::size_t> indices);

struct BackpropResult {
  double mean_loss = 0;
  std::vector<int> predictions;
};

/// Gradients of the mean batch loss for every parameter block.
template <typename T>
std::vector<BasicTensor<T>> backprop(const Network<T>& net, const std::vector<BasicTensor<T>>& inputs,
                                     std::span<const int> labels, BackpropResult* result = nullptr);

/// In place, per element: v = momentum * v - lr * (g + wd * w); w = w + v.
template <typename T>
void sgd_update(std::span<T> w, std::span<const T> g, std::span<T> v, T lr, T momentum, T wd);

/// One optimizer step over every block. Weights use lr_weights and the
/// conv or fc decay of their module; biases use lr_bias and no decay.
template <typename T>
void sgd_step(Network<T>& net, const std::vector<BasicTensor<T>>& grads, OptimizerState<T>& state,
              const TrainConfig& cfg);

/// Class with the highest output per sample (ties go to cover).
std::vector<int> predict(const Model& model, const SampleSet& set, std::size_t batch = 64);

using EpochCallback = std::function<void(const LossRecord&)>;

/// `cfg.epochs` passes over `train_set`, reshuffled every epoch from
/// cfg.rng_seed; the trailing partial batch is dropped. After each epoch the
/// model is evaluated on the training set (and `test_set` if given).
/// Throws NumericError naming the epoch and batch if the loss diverges.
std::vector<LossRecord> train(Model& model, const SampleSet& train_set, const TrainConfig& cfg,
                              const SampleSet* test_set = nullptr, const EpochCallback& on_epoch = {});

/// Training history as CSV: epoch,mean_loss,train_pe,test_pe.
std::string history_csv(const std::vector<LossRecord>& history);

// ---------------------------------------------------------------------------

struct GradientCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Parameters sampled per block (all of them if the block is smaller).
  std::size_t samples_per_block = 200;
  std::uint64_t seed = 0;
  /// Denominator floor of the relative error. Negative selects
  /// eps * max(1, |loss|) / (step * tolerance): below it, central differences
  /// cannot resolve the gradient to `tolerance` and the comparison becomes
  /// absolute at the rounding-noise level.
  double noise_floor = -1;
};

struct GradientCheckReport {
  struct Block {
    std::string name;
    std::size_t checked = 0;
    /// Probes dropped because the +-step evaluations straddled a relu or
    /// absolute-value kink.
    std::size_t kinks = 0;
    double max_rel_error = 0;
  };
  std::vector<Block> blocks;
  double max_rel_error = 0;
  double noise_floor = 0;
  bool passed = false;
};

/// Relative discrepancy used by gradient checks:
/// |a - n| / max(|a|, |n|, floor), 0 when the denominator is zero.
double relative_error(double analytic, double numeric, double floor = 0);

using AnalyticGradient = std::function<std::vector<TensorD>(const Network<double>&, const TensorD&, int)>;

/// Compares analytic gradients (backprop by default) of loss_mse on one
/// sample with central differences, on a random subset of each block.
/// Probes whose two evaluations see a different relu/absolute sign pattern
/// are skipped and counted; sampling continues until `samples_per_block`
/// clean probes are found or the block is exhausted.
GradientCheckReport gradient_check(const Network<double>& net, const TensorD& input, int label,
                                   const GradientCheckOptions& options = {},
                                   const AnalyticGradient& analytic = {});

}  // namespace stegnet
