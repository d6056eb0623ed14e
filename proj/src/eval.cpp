#include "stegnet/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stegnet/model_io.hpp"
#include "stegnet/seed.hpp"

namespace stegnet {

namespace {

void check_cut(const Model& model, std::size_t cut_after) {
  const std::size_t flat = flatten_index(model.spec());
  if (cut_after >= model.num_layers() || cut_after > flat)
    throw ArgumentError("invalid cut after layer " + std::to_string(cut_after) + ": must be at or before layer " +
                        std::to_string(flat) + " (flatten)");
}

}  // namespace

std::vector<float> extract_features(const Model& model, std::size_t cut_after, const Tensor& input) {
  check_cut(model, cut_after);
  const Tensor out = model.forward(input, cut_after + 1);
  return {out.values().begin(), out.values().end()};
}

FeatureSet extract_features(const Model& model, std::size_t cut_after, const SampleSet& set, std::size_t batch) {
  check_cut(model, cut_after);
  FeatureSet fs;
  fs.dim = model.shapes()[cut_after].num_elements();
  fs.values.reserve(set.size() * fs.dim);
  fs.labels = set.labels();
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += batch) {
    idx.resize(std::min(batch, set.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    for (const Tensor& t : model.forward(batch_inputs<float>(set, idx), cut_after + 1))
      fs.values.insert(fs.values.end(), t.values().begin(), t.values().end());
  }
  return fs;
}

std::vector<std::uint8_t> serialize_features(const FeatureSet& fs) {
  if (fs.values.size() != fs.size() * fs.dim) throw ShapeError("feature matrix does not match count x dim");
  std::vector<std::uint8_t> out = {'S', 'T', 'G', 'F'};
  out.reserve(24 + fs.size() * (1 + 4 * fs.dim));
  detail::put_u32(out, kFeatureFormatVersion);
  detail::put_u64(out, fs.size());
  detail::put_u64(out, fs.dim);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    out.push_back(static_cast<std::uint8_t>(fs.labels[i]));
    for (const float v : fs.row(i)) detail::put_f32(out, v);
  }
  return out;
}

FeatureSet deserialize_features(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw IoError(IoErrc::truncated, "feature file shorter than its magic");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, "STGF")) throw IoError(IoErrc::bad_magic, "not a feature file");
  if (bytes.size() < 24) throw IoError(IoErrc::truncated, "feature file header");
  const std::uint32_t version = detail::get_u32(bytes.data() + 4);
  if (version != kFeatureFormatVersion)
    throw IoError(IoErrc::version_mismatch, "feature file version " + std::to_string(version));
  FeatureSet fs;
  const std::uint64_t n = detail::get_u64(bytes.data() + 8);
  fs.dim = detail::get_u64(bytes.data() + 16);
  const std::uint64_t row = 1 + 4 * static_cast<std::uint64_t>(fs.dim);
  if (fs.dim > bytes.size() || (bytes.size() - 24) / row < n) throw IoError(IoErrc::truncated, "feature records");
  if (bytes.size() - 24 != n * row) throw IoError(IoErrc::malformed, "trailing bytes after feature records");
  fs.labels.resize(n);
  fs.values.resize(n * fs.dim);
  const std::uint8_t* p = bytes.data() + 24;
  for (std::size_t i = 0; i < n; ++i) {
    if (*p > 1) throw IoError(IoErrc::malformed, "label byte " + std::to_string(*p));
    fs.labels[i] = *p++;
    for (std::size_t j = 0; j < fs.dim; ++j, p += 4) fs.values[i * fs.dim + j] = detail::get_f32(p);
  }
  return fs;
}

void save_features(const FeatureSet& fs, const std::string& path) {
  detail::write_file_atomic(path, serialize_features(fs));
}

FeatureSet load_features(const std::string& path) {
  const auto bytes = detail::read_file(path);
  try {
    return deserialize_features(bytes);
  } catch (const IoError& e) {
    throw IoError(e.code(), path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

double FldLearner::score(std::span<const float> x) const {
  double s = 0;
  for (std::size_t j = 0; j < subset.size(); ++j) s += w[j] * static_cast<double>(x[subset[j]]);
  return s;
}

namespace {

/// Training threshold: minimal (FA + MD) over all cut points of the sorted
/// scores, middle optimal cut on ties.
double fit_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  const std::size_t n = scores.size();
  const std::size_t stego = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kStego));

  // Cut k: the k lowest scores are called cover.
  std::size_t errors = n - stego;  // k = 0: every cover is a false alarm
  std::size_t best = errors;
  std::vector<std::size_t> best_cuts = {0};
  for (std::size_t k = 1; k <= n; ++k) {
    errors = labels[order[k - 1]] == kStego ? errors + 1 : errors - 1;
    if (k < n && scores[order[k]] == scores[order[k - 1]]) continue;
    if (errors < best) {
      best = errors;
      best_cuts.assign(1, k);
    } else if (errors == best) {
      best_cuts.push_back(k);
    }
  }
  const std::size_t k = best_cuts[(best_cuts.size() - 1) / 2];
  const double lo = scores[order.front()];
  const double hi = scores[order.back()];
  const double margin = std::max(1.0, hi - lo);
  if (k == 0) return lo - margin;
  if (k == n) return hi;
  return 0.5 * (scores[order[k - 1]] + scores[order[k]]);
}

}  // namespace

FldLearner fld_fit(const FeatureSet& fs, std::vector<std::size_t> subset, double lambda) {
  const std::size_t n = fs.size();
  const std::size_t d = subset.size();
  if (d == 0) throw ArgumentError("empty feature subset");
  for (const std::size_t j : subset)
    if (j >= fs.dim) throw ArgumentError("feature index " + std::to_string(j) + " out of range");
  std::size_t counts[2] = {0, 0};
  for (const int l : fs.labels) ++counts[l == kStego];
  if (counts[0] == 0 || counts[1] == 0) throw ArgumentError("FLD needs samples of both classes");

  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = fs.values[i * fs.dim + subset[j]];
  Eigen::VectorXd mu[2] = {Eigen::VectorXd::Zero(d), Eigen::VectorXd::Zero(d)};
  for (std::size_t i = 0; i < n; ++i) mu[fs.labels[i] == kStego] += x.row(i).transpose();
  mu[0] /= double(counts[0]);
  mu[1] /= double(counts[1]);
  for (std::size_t i = 0; i < n; ++i) x.row(i) -= mu[fs.labels[i] == kStego].transpose();

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  scatter.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  scatter = scatter.selfadjointView<Eigen::Lower>();
  if (!(lambda > 0)) lambda = 1e-6 * scatter.trace() / double(d);
  if (!(lambda > 0)) lambda = 1e-12;  // constant features
  scatter.diagonal().array() += lambda;
  const Eigen::LLT<Eigen::MatrixXd> llt(scatter);
  if (llt.info() != Eigen::Success) throw NumericError("within-class scatter is singular after regularization");
  const Eigen::VectorXd w = llt.solve(mu[1] - mu[0]);
  if (!w.allFinite()) throw NumericError("FLD projection is not finite");

  FldLearner fl;
  fl.subset = std::move(subset);
  fl.w.assign(w.data(), w.data() + d);
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = fl.score(fs.row(i));
  fl.threshold = fit_threshold(scores, fs.labels);
  return fl;
}

std::size_t default_d_sub(std::size_t dim) {
  const auto r = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(dim))));
  return std::min(dim, r * 8);
}

Ensemble ensemble_fit(const FeatureSet& fs, const EnsembleOptions& options) {
  if (options.learners == 0) throw ArgumentError("ensemble needs at least one learner");
  if (options.learners % 2 == 0 && !options.allow_even)
    throw ArgumentError("ensemble size must be odd to avoid vote ties");
  const std::size_t d_sub = options.d_sub ? options.d_sub : default_d_sub(fs.dim);
  if (d_sub > fs.dim)
    throw ArgumentError("subspace size " + std::to_string(d_sub) + " exceeds dimension " + std::to_string(fs.dim));
  Ensemble ens;
  ens.d_sub = d_sub;
  ens.seed = options.seed;
  std::vector<std::size_t> all(fs.dim);
  for (std::size_t l = 0; l < options.learners; ++l) {
    std::iota(all.begin(), all.end(), 0);
    Rng rng(derive_seed(options.seed, "subspace", l));
    for (std::size_t j = 0; j < d_sub; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, fs.dim - 1);
      std::swap(all[j], all[pick(rng)]);
    }
    std::vector<std::size_t> subset(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(d_sub));
    std::sort(subset.begin(), subset.end());
    ens.learners.push_back(fld_fit(fs, std::move(subset)));
  }
  return ens;
}

int ensemble_predict(const Ensemble& ens, std::span<const float> x) {
  std::size_t votes = 0;
  for (const auto& l : ens.learners) votes += l.decide(x) == kStego;
  return 2 * votes > ens.learners.size() ? kStego : kCover;
}

std::vector<int> ensemble_predict(const Ensemble& ens, const FeatureSet& fs) {
  std::vector<int> out(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) out[i] = ensemble_predict(ens, fs.row(i));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> EvalReport::p_errors() const {
  std::vector<double> out;
  for (const auto& c : trials) out.push_back(c.p_error());
  return out;
}

double EvalReport::max() const {
  const auto pe = p_errors();
  return pe.empty() ? 0.0 : *std::max_element(pe.begin(), pe.end());
}

double EvalReport::min() const {
  const auto pe = p_errors();
  return pe.empty() ? 0.0 : *std::min_element(pe.begin(), pe.end());
}

double EvalReport::average() const {
  const auto pe = p_errors();
  return pe.empty() ? 0.0 : std::accumulate(pe.begin(), pe.end(), 0.0) / double(pe.size());
}

double EvalReport::variance() const {
  const auto pe = p_errors();
  if (pe.empty()) return 0.0;
  const double mean = average();
  double acc = 0;
  for (const double v : pe) acc += (v - mean) * (v - mean);
  return acc / double(pe.size());
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os.precision(6);
  os << "protocol " << tag << " (train " << train_source << ", test " << test_source << ")\n";
  for (std::size_t t = 0; t < trials.size(); ++t)
    os << "trial " << t << ": P_E " << trials[t].p_error() << " FA " << trials[t].false_alarms << " MD "
       << trials[t].missed_detections << " N " << trials[t].total << '\n';
  os << "max " << max() << " min " << min() << " variance " << variance() << " average " << average() << '\n';
  return os.str();
}

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "trial,pe,fa,md\n";
  for (std::size_t t = 0; t < trials.size(); ++t)
    os << t << ',' << trials[t].p_error() << ',' << trials[t].false_alarms << ',' << trials[t].missed_detections
       << '\n';
  return os.str();
}

std::string protocol_tag(const std::string& train_source, const std::string& test_source) {
  return train_source == test_source ? "clairvoyant" : "mismatch";
}

EvalReport evaluate_model(const Model& model, const SampleSet& test) {
  EvalReport r;
  r.train_source = model.spec().source;
  r.test_source = test.origin;
  r.tag = protocol_tag(r.train_source, r.test_source);
  r.trials.push_back(confusion(predict(model, test), test.labels()));
  return r;
}

EvalReport run_protocol(const ProtocolConfig& config, const SampleSet& train_source, const SampleSet* test_source,
                        const Classifier& classifier) {
  if (config.trials == 0) throw ArgumentError("protocol needs at least one trial");
  const bool mismatch = test_source && test_source->origin != train_source.origin;
  EvalReport r;
  r.train_source = train_source.origin;
  r.test_source = mismatch ? test_source->origin : train_source.origin;
  r.tag = protocol_tag(r.train_source, r.test_source);
  for (std::size_t t = 0; t < config.trials; ++t) {
    Split sp = make_splits(train_source, config.train_pairs, mismatch ? 0 : config.test_pairs,
                           derive_seed(config.seed, "trial", t));
    const SampleSet& test = mismatch ? *test_source : sp.test;
    r.trials.push_back(confusion(classifier(sp.train, test, t), test.labels()));
  }
  return r;
}

namespace {

Model train_for_trial(const NetSpec& spec, TrainConfig cfg, std::uint64_t seed, std::size_t trial,
                      const SampleSet& train_set) {
  Model m = Model::initialized(spec, derive_seed(seed, "init", trial));
  cfg.rng_seed = derive_seed(seed, "train", trial);
  train(m, train_set, cfg);
  m.set_source(train_set.origin);
  return m;
}

}  // namespace

Classifier cnn_classifier(NetSpec spec, TrainConfig cfg, std::uint64_t seed) {
  return [=](const SampleSet& train_set, const SampleSet& test, std::size_t trial) {
    return predict(train_for_trial(spec, cfg, seed, trial, train_set), test);
  };
}

Classifier cut_ensemble_classifier(NetSpec spec, TrainConfig cfg, std::size_t cut_after, EnsembleOptions ens,
                                   std::uint64_t seed) {
  return [=](const SampleSet& train_set, const SampleSet& test, std::size_t trial) {
    const Model m = train_for_trial(spec, cfg, seed, trial, train_set);
    EnsembleOptions eo = ens;
    eo.seed = derive_seed(seed, "ensemble", trial);
    const Ensemble e = ensemble_fit(extract_features(m, cut_after, train_set), eo);
    return ensemble_predict(e, extract_features(m, cut_after, test));
  };
}

}  // namespace stegnet
