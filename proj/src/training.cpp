#include "stegnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "stegnet/metrics.hpp"
#include "stegnet/seed.hpp"

namespace stegnet {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ArgumentError("batch size must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ArgumentError("momentum must be in [0, 1)");
  if (!(lr_weights > 0) || !(lr_bias > 0)) throw ArgumentError("learning rates must be positive");
  if (!(wd_conv >= 0) || !(wd_fc >= 0)) throw ArgumentError("weight decay must be >= 0");
}

template <typename T>
OptimizerState<T> OptimizerState<T>::zeros_like(const Network<T>& net) {
  OptimizerState s;
  for (std::size_t i = 0; i < net.num_blocks(); ++i) s.velocity.emplace_back(net.block(i).shape());
  return s;
}

LossValue loss_mse(std::span<const double> outputs, int label) {
  if (outputs.size() != 2) throw ShapeError("loss expects two outputs");
  const double target[2] = {label == kStego ? 0.0 : 1.0, label == kStego ? 1.0 : 0.0};
  LossValue lv;
  for (int l = 0; l < 2; ++l) {
    const double d = outputs[l] - target[l];
    lv.loss += d * d;
    lv.grad[l] = 2.0 * d;
  }
  return lv;
}

template <typename T>
std::vector<BasicTensor<T>> batch_inputs(const SampleSet& set, std::span<const std::size_t> indices) {
  std::vector<BasicTensor<T>> out;
  out.reserve(indices.size());
  for (const std::size_t i : indices) out.push_back(to_tensor<T>(set.samples.at(i).image));
  return out;
}

namespace {

int decide(std::span<const double> probs) { return probs[1] > probs[0] ? kStego : kCover; }

}  // namespace

template <typename T>
std::vector<BasicTensor<T>> backprop(const Network<T>& net, const std::vector<BasicTensor<T>>& inputs,
                                     std::span<const int> labels, BackpropResult* result) {
  if (inputs.size() != labels.size() || inputs.empty()) throw ArgumentError("backprop needs one label per input");
  const auto trace = net.forward_trace(inputs);
  const auto& outputs = trace.back();
  const double scale = 1.0 / static_cast<double>(inputs.size());
  typename Network<T>::Batch grad_top;
  grad_top.reserve(inputs.size());
  double loss_sum = 0;
  if (result) result->predictions.clear();
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const double h[2] = {static_cast<double>(outputs[b][0]), static_cast<double>(outputs[b][1])};
    const LossValue lv = loss_mse(h, labels[b]);
    loss_sum += lv.loss;
    BasicTensor<T> g(Shape{2});
    g[0] = static_cast<T>(lv.grad[0] * scale);
    g[1] = static_cast<T>(lv.grad[1] * scale);
    grad_top.push_back(std::move(g));
    if (result) result->predictions.push_back(decide(h));
  }
  if (result) result->mean_loss = loss_sum * scale;
  return net.backward(trace, grad_top);
}

template <typename T>
void sgd_update(std::span<T> w, std::span<const T> g, std::span<T> v, T lr, T momentum, T wd) {
  if (w.size() != g.size() || w.size() != v.size()) throw ShapeError("sgd_update: block sizes differ");
  for (std::size_t i = 0; i < w.size(); ++i) {
    v[i] = momentum * v[i] - lr * (g[i] + wd * w[i]);
    w[i] = w[i] + v[i];
  }
}

template <typename T>
void sgd_step(Network<T>& net, const std::vector<BasicTensor<T>>& grads, OptimizerState<T>& state,
              const TrainConfig& cfg) {
  if (grads.size() != net.num_blocks() || state.velocity.size() != net.num_blocks())
    throw ShapeError("sgd_step: gradient/state count does not match the network");
  for (std::size_t i = 0; i < net.num_blocks(); ++i) {
    const BlockInfo& info = net.block_info(i);
    const bool weight = info.role == BlockInfo::Role::weight;
    const double lr = weight ? cfg.lr_weights : cfg.lr_bias;
    const double wd = !weight ? 0.0 : (info.module == BlockInfo::Module::conv ? cfg.wd_conv : cfg.wd_fc);
    sgd_update<T>(net.block(i).values(), grads[i].values(), state.velocity[i].values(), static_cast<T>(lr),
                  static_cast<T>(cfg.momentum), static_cast<T>(wd));
  }
}

std::vector<int> predict(const Model& model, const SampleSet& set, std::size_t batch) {
  std::vector<int> out;
  out.reserve(set.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch) {
    idx.resize(std::min(batch, set.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto outputs = model.forward(batch_inputs<float>(set, idx));
    for (const auto& o : outputs) {
      const double h[2] = {o[0], o[1]};
      out.push_back(decide(h));
    }
  }
  return out;
}

std::vector<LossRecord> train(Model& model, const SampleSet& train_set, const TrainConfig& cfg,
                              const SampleSet* test_set, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ArgumentError("training set is empty");
  if (cfg.batch_size > train_set.size())
    throw ArgumentError("batch size " + std::to_string(cfg.batch_size) + " exceeds the " +
                        std::to_string(train_set.size()) + " training samples");
  const std::vector<int> labels = train_set.labels();
  const std::vector<int> test_labels = test_set ? test_set->labels() : std::vector<int>{};
  OptimizerState<float> state = OptimizerState<float>::zeros_like(model);
  std::vector<LossRecord> history;
  std::vector<std::size_t> order(train_set.size());
  std::vector<int> batch_labels(cfg.batch_size);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.rng_seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t batches = train_set.size() / cfg.batch_size;
    double loss_sum = 0;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::span<const std::size_t> idx(order.data() + bi * cfg.batch_size, cfg.batch_size);
      for (std::size_t k = 0; k < idx.size(); ++k) batch_labels[k] = labels[idx[k]];
      BackpropResult r;
      std::vector<Tensor> grads;
      try {
        grads = backprop(model, batch_inputs<float>(train_set, idx), batch_labels, &r);
      } catch (const NumericError& e) {
        throw NumericError("diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) + ": " +
                           e.what());
      }
      if (!std::isfinite(r.mean_loss))
        throw NumericError("diverged at epoch " + std::to_string(epoch) + ", batch " + std::to_string(bi) +
                           ": non-finite loss");
      sgd_step(model, grads, state, cfg);
      loss_sum += r.mean_loss;
    }
    LossRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / static_cast<double>(batches);
    rec.train_pe = p_error(predict(model, train_set), labels);
    if (test_set) rec.test_pe = p_error(predict(model, *test_set), test_labels);
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

std::string history_csv(const std::vector<LossRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,mean_loss,train_pe,test_pe\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << r.mean_loss << ',' << r.train_pe << ',';
    if (r.test_pe) os << *r.test_pe;
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return scale == 0.0 ? 0.0 : std::abs(analytic - numeric) / scale;
}

namespace {

double sample_loss(const Network<double>& net, const TensorD& input, int label) {
  const TensorD out = net.forward(input);
  const double h[2] = {out[0], out[1]};
  return loss_mse(h, label).loss;
}

/// Loss plus the sign of every relu/absolute input.
struct Probe {
  double loss = 0;
  std::vector<bool> signs;
};

Probe probe_loss(const Network<double>& net, const TensorD& input, int label) {
  const auto trace = net.forward_trace({input});
  Probe p;
  const TensorD& out = trace.back()[0];
  const double h[2] = {out[0], out[1]};
  p.loss = loss_mse(h, label).loss;
  for (std::size_t i = 0; i < net.spec().layers.size(); ++i) {
    const auto* a = std::get_if<ActivationSpec>(&net.spec().layers[i]);
    if (!a || (a->kind != ActivationKind::relu && a->kind != ActivationKind::absolute)) continue;
    for (double v : trace[i][0].values()) p.signs.push_back(v > 0);
  }
  return p;
}

}  // namespace

GradientCheckReport gradient_check(const Network<double>& net, const TensorD& input, int label,
                                   const GradientCheckOptions& options, const AnalyticGradient& analytic) {
  const std::vector<TensorD> grads =
      analytic ? analytic(net, input, label) : backprop(net, std::vector<TensorD>{input}, std::span(&label, 1));
  if (grads.size() != net.num_blocks()) throw ShapeError("gradient_check: analytic gradient count mismatch");
  Network<double> probe = net;
  Rng rng(derive_seed(options.seed, "gradient-check"));
  GradientCheckReport report;
  report.noise_floor = options.noise_floor >= 0 ? options.noise_floor
                                                : std::numeric_limits<double>::epsilon() *
                                                      std::max(1.0, std::abs(sample_loss(net, input, label))) /
                                                      (options.step * options.tolerance);
  for (std::size_t b = 0; b < net.num_blocks(); ++b) {
    const std::size_t n = net.block(b).size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    GradientCheckReport::Block rb{net.block_info(b).name(), 0, 0, 0.0};
    // Partial Fisher-Yates: position k holds the k-th drawn index.
    for (std::size_t k = 0; k < n && rb.checked < options.samples_per_block; ++k) {
      std::swap(idx[k], idx[k + std::uniform_int_distribution<std::size_t>(0, n - 1 - k)(rng)]);
      const std::size_t i = idx[k];
      double& p = probe.block(b).data()[i];
      const double saved = p;
      p = saved + options.step;
      const Probe up = probe_loss(probe, input, label);
      p = saved - options.step;
      const Probe down = probe_loss(probe, input, label);
      p = saved;
      if (up.signs != down.signs) {
        ++rb.kinks;
        continue;
      }
      ++rb.checked;
      const double numeric = (up.loss - down.loss) / (2 * options.step);
      rb.max_rel_error = std::max(rb.max_rel_error, relative_error(grads[b][i], numeric, report.noise_floor));
    }
    report.max_rel_error = std::max(report.max_rel_error, rb.max_rel_error);
    report.blocks.push_back(std::move(rb));
  }
  report.passed = report.max_rel_error < options.tolerance;
  return report;
}

template struct OptimizerState<float>;
template struct OptimizerState<double>;
template std::vector<Tensor> batch_inputs<float>(const SampleSet&, std::span<const std::size_t>);
template std::vector<TensorD> batch_inputs<double>(const SampleSet&, std::span<const std::size_t>);
template std::vector<Tensor> backprop(const Network<float>&, const std::vector<Tensor>&, std::span<const int>,
                                      BackpropResult*);
template std::vector<TensorD> backprop(const Network<double>&, const std::vector<TensorD>&, std::span<const int>,
                                       BackpropResult*);
template void sgd_update<float>(std::span<float>, std::span<const float>, std::span<float>, float, float, float);
template void sgd_update<double>(std::span<double>, std::span<const double>, std::span<double>, double, double,
                                 double);
template void sgd_step(Network<float>&, const std::vector<Tensor>&, OptimizerState<float>&, const TrainConfig&);
template void sgd_step(Network<double>&, const std::vector<TensorD>&, OptimizerState<double>&, const TrainConfig&);

}  // namespace stegnet
