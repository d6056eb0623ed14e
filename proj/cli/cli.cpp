#include "stegnet/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>

#include "stegnet/eval.hpp"
#include "stegnet/model_io.hpp"
#include "stegnet/parallel.hpp"
#include "stegnet/seed.hpp"

namespace stegnet::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  bool quiet = false;
};

struct ArchOptions {
  std::string preset;
  std::string arch;
  std::size_t input_size = 0;
  std::vector<std::size_t> conv_filters;
  std::vector<std::size_t> fc_hidden;
};

struct TrainOptions {
  TrainConfig cfg;
  std::optional<std::size_t> epochs;
};

/// Removes every registered output unless commit() is called.
class OutputGuard {
 public:
  void add(const fs::path& p) { paths_.push_back(p); }
  void commit() { paths_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (auto it = paths_.rbegin(); it != paths_.rend(); ++it) fs::remove(*it, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Global seed; every random stream derives from it")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads (0 = all cores); results do not depend on it")
      ->capture_default_str();
  cmd->add_flag("-q,--quiet", c.quiet, "No progress output on stderr");
}

void add_arch(CLI::App* cmd, ArchOptions& a, bool need_size) {
  auto* p = cmd->add_option("--preset", a.preset, "Architecture preset: pibre-cnn, qian-cnn or pibre-fnn");
  auto* f = cmd->add_option("--arch", a.arch, "Architecture file")->check(CLI::ExistingFile);
  p->excludes(f);
  auto* s = cmd->add_option("--input-size", a.input_size, "Preset input side: 256 or 32");
  if (!need_size) s->description("Preset input side: 256 or 32 (default: image size of the data)");
  cmd->add_option("--conv-filters", a.conv_filters, "Preset filters per conv layer")->delimiter(',');
  cmd->add_option("--fc-hidden", a.fc_hidden, "Preset hidden fc widths")->delimiter(',');
}

void add_train(CLI::App* cmd, TrainOptions& t) {
  cmd->add_option("--epochs", t.epochs, "Passes over the training set")->required();
  cmd->add_option("--batch", t.cfg.batch_size, "Mini-batch size")->capture_default_str();
  cmd->add_option("--momentum", t.cfg.momentum, "SGD momentum")->capture_default_str();
  cmd->add_option("--lr-weights", t.cfg.lr_weights, "Learning rate of weights")->capture_default_str();
  cmd->add_option("--lr-bias", t.cfg.lr_bias, "Learning rate of biases")->capture_default_str();
  cmd->add_option("--wd-conv", t.cfg.wd_conv, "Weight decay of conv weights")->capture_default_str();
  cmd->add_option("--wd-fc", t.cfg.wd_fc, "Weight decay of fc weights")->capture_default_str();
}

NetSpec resolve_spec(const ArchOptions& a, std::size_t data_size) {
  if (!a.arch.empty()) return load_netspec(a.arch);
  if (a.preset.empty()) throw ArgumentError("one of --preset or --arch is required");
  PresetOptions po;
  po.input_size = a.input_size ? a.input_size : data_size;
  po.conv_filters = a.conv_filters;
  po.fc_hidden = a.fc_hidden;
  return preset(a.preset, po);
}

void require_readable(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::open_failed, std::string(what) + " " + path + " is not readable");
}

void require_writable_parent(const std::string& path) {
  const fs::path parent = fs::absolute(fs::path(path)).parent_path();
  if (!fs::is_directory(parent)) throw IoError(IoErrc::open_failed, "output directory " + parent.string() + " does not exist");
}

void require_input_fits(const NetSpec& spec, const SampleSet& set, const std::string& name) {
  if (set.empty()) throw ArgumentError(name + " holds no pairs");
  const auto& img = set.samples.front().image;
  if (spec.input.maps != 1 || spec.input.rows != img.height || spec.input.cols != img.width)
    throw ShapeError(name + " images are " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                     ", the architecture expects " + std::to_string(spec.input.cols) + "x" +
                     std::to_string(spec.input.rows));
  for (const auto& s : set.samples)
    if (s.image.width != img.width || s.image.height != img.height)
      throw ShapeError(name + " mixes image sizes");
}

std::size_t data_side(const SampleSet& set) { return set.empty() ? 0 : set.samples.front().image.width; }

void write_text(const std::string& path, const std::string& text, OutputGuard& guard) {
  guard.add(path);
  detail::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

EpochCallback progress(const Common& c, std::ostream& err) {
  if (c.quiet) return {};
  return [&err](const LossRecord& r) {
    err << "epoch " << r.epoch << ": loss " << r.mean_loss << ", train P_E " << r.train_pe;
    if (r.test_pe) err << ", test P_E " << *r.test_pe;
    err << std::endl;
  };
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  Common common;
  std::string input_dir;
  std::vector<std::size_t> synthetic;
  std::string out_dir;
  std::string source;
  double rate = 0.4;
  SyntheticCoverOptions cover;
};

void cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  if (a.input_dir.empty() == a.synthetic.empty()) throw ArgumentError("give exactly one of --input-dir or --synthetic");
  if (!(a.rate > 0 && a.rate <= 1)) throw ArgumentError("--rate must be in (0, 1]");

  std::vector<fs::path> inputs;
  if (!a.input_dir.empty()) {
    if (!fs::is_directory(a.input_dir)) throw IoError(IoErrc::open_failed, a.input_dir + " is not a directory");
    for (const auto& e : fs::directory_iterator(a.input_dir))
      if (e.is_regular_file() && e.path().extension() == ".pgm") inputs.push_back(e.path());
    if (inputs.empty()) throw ArgumentError("no images (*.pgm) in " + a.input_dir);
    std::sort(inputs.begin(), inputs.end());
  } else if (a.synthetic[0] == 0 || a.synthetic[1] == 0 || a.synthetic[2] == 0) {
    throw ArgumentError("--synthetic needs positive n, width and height");
  }

  const fs::path root(a.out_dir);
  OutputGuard guard;
  for (const char* sub : {"", "covers", "stegos"}) {
    const fs::path d = root / sub;
    if (!fs::exists(d)) {
      fs::create_directories(d);
      guard.add(d);
    }
  }

  Manifest manifest;
  manifest.source = !a.source.empty() ? a.source
                    : inputs.empty()  ? "synthetic"
                                      : fs::path(a.input_dir).filename().string();
  const std::uint64_t embed_base = derive_seed(a.common.seed, "embed");
  std::optional<std::pair<std::size_t, std::size_t>> size;
  const std::size_t n_sources = inputs.empty() ? a.synthetic[0] : inputs.size();
  for (std::size_t src = 0; src < n_sources; ++src) {
    const GrayImage img = inputs.empty()
                              ? synthetic_cover(a.synthetic[1], a.synthetic[2], derive_seed(a.common.seed, "cover", src), a.cover)
                              : read_pgm(inputs[src].string());
    std::vector<GrayImage> covers;
    if (img.width == 512 && img.height == 512) {
      for (auto& q : crop_quarters(img)) covers.push_back(std::move(q));
    } else {
      covers.push_back(img);
    }
    for (const GrayImage& c : covers) {
      if (!size) size.emplace(c.width, c.height);
      if (*size != std::pair(c.width, c.height))
        throw ShapeError("cover size mismatch: " + std::to_string(c.width) + "x" + std::to_string(c.height) +
                         " after " + std::to_string(size->first) + "x" + std::to_string(size->second));
      const std::int64_t id = static_cast<std::int64_t>(manifest.entries.size());
      char name[32];
      std::snprintf(name, sizeof name, "%06lld.pgm", static_cast<long long>(id));
      const std::string cover_rel = std::string("covers/") + name, stego_rel = std::string("stegos/") + name;
      guard.add(root / cover_rel);
      write_pgm(c, (root / cover_rel).string());
      guard.add(root / stego_rel);
      write_pgm(lsb_match_embed(c, a.rate, embed_base ^ static_cast<std::uint64_t>(id)), (root / stego_rel).string());
      manifest.entries.push_back({id, cover_rel, stego_rel});
    }
    if (!a.common.quiet && (src + 1) % 100 == 0) err << "prepared " << src + 1 << "/" << n_sources << std::endl;
  }
  const fs::path mpath = root / "manifest.tsv";
  guard.add(mpath);
  write_manifest(manifest, mpath.string());
  guard.commit();
  out << mpath.string() << '\n' << manifest.entries.size() << " pairs\n";
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  Common common;
  ArchOptions arch;
  TrainOptions train;
  std::string manifest;
  std::string test_manifest;
  std::string model_out;
  std::string history_out;
};

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  require_readable(a.manifest, "manifest");
  if (!a.test_manifest.empty()) require_readable(a.test_manifest, "test manifest");
  require_writable_parent(a.model_out);
  const std::string history = a.history_out.empty() ? a.model_out + ".csv" : a.history_out;
  require_writable_parent(history);
  TrainConfig cfg = a.train.cfg;
  cfg.epochs = *a.train.epochs;
  cfg.rng_seed = a.common.seed;
  cfg.validate();

  const SampleSet train_set = load_samples(a.manifest);
  std::optional<SampleSet> test_set;
  if (!a.test_manifest.empty()) test_set = load_samples(a.test_manifest);
  const NetSpec spec = resolve_spec(a.arch, data_side(train_set));
  validate(spec);
  require_input_fits(spec, train_set, "training set");
  if (test_set) require_input_fits(spec, *test_set, "test set");

  Model model = Model::initialized(spec, derive_seed(a.common.seed, "init"));
  if (!a.common.quiet)
    err << "training " << spec.name << " (" << model.param_count() << " parameters) on " << train_set.size()
        << " images" << std::endl;
  const auto hist = train(model, train_set, cfg, test_set ? &*test_set : nullptr, progress(a.common, err));
  model.set_source(train_set.origin);

  OutputGuard guard;
  guard.add(a.model_out);
  save_model(model, a.model_out);
  write_text(history, history_csv(hist), guard);
  guard.commit();

  out << std::setprecision(17);
  if (hist.empty()) {
    out << "epochs 0: initialized model saved\n";
  } else {
    out << "train P_E " << hist.back().train_pe << '\n';
    if (hist.back().test_pe) out << "test P_E " << *hist.back().test_pe << '\n';
  }
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  Common common;
  std::string model;
  std::string manifest;
  std::string report;
  // Protocol mode.
  std::string train_manifest;
  ArchOptions arch;
  TrainOptions train;
  std::size_t trials = 10;
  std::size_t train_pairs = 0;
  std::size_t test_pairs = 0;
  std::string classifier = "cnn";
  std::optional<std::size_t> cut;
  EnsembleOptions ensemble;
};

void cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.report.empty()) require_writable_parent(a.report + ".txt");
  EvalReport report;
  if (a.train_manifest.empty()) {
    if (a.model.empty() || a.manifest.empty()) throw ArgumentError("eval needs --model and --manifest");
    require_readable(a.model, "model");
    require_readable(a.manifest, "manifest");
    const Model model = load_model(a.model);
    const SampleSet test = load_samples(a.manifest);
    require_input_fits(model.spec(), test, "test set");
    report = evaluate_model(model, test);
  } else {
    if (!a.model.empty()) throw ArgumentError("--model and --train-manifest are exclusive");
    if (!a.train.epochs) throw ArgumentError("protocol mode needs --epochs");
    require_readable(a.train_manifest, "training manifest");
    if (!a.manifest.empty()) require_readable(a.manifest, "test manifest");
    TrainConfig cfg = a.train.cfg;
    cfg.epochs = *a.train.epochs;
    cfg.validate();
    const SampleSet source = load_samples(a.train_manifest);
    std::optional<SampleSet> other;
    if (!a.manifest.empty()) other = load_samples(a.manifest);
    const NetSpec spec = resolve_spec(a.arch, data_side(source));
    validate(spec);
    require_input_fits(spec, source, "training source");
    if (other) require_input_fits(spec, *other, "test source");

    Classifier inner;
    if (a.classifier == "cnn") {
      inner = cnn_classifier(spec, cfg, a.common.seed);
    } else if (a.classifier == "cut-ensemble") {
      const std::size_t cut = a.cut ? *a.cut : flatten_index(spec);
      inner = cut_ensemble_classifier(spec, cfg, cut, a.ensemble, a.common.seed);
    } else {
      throw ArgumentError("--classifier must be cnn or cut-ensemble");
    }
    const bool quiet = a.common.quiet;
    const std::size_t trials = a.trials;
    const Classifier classifier = [&, inner](const SampleSet& tr, const SampleSet& te, std::size_t t) {
      if (!quiet) err << "trial " << t + 1 << "/" << trials << ": training on " << tr.size() << " images" << std::endl;
      return inner(tr, te, t);
    };
    report = run_protocol({a.trials, a.train_pairs, a.test_pairs, a.common.seed}, source, other ? &*other : nullptr,
                          classifier);
  }
  if (!a.report.empty()) {
    OutputGuard guard;
    write_text(a.report + ".txt", report.to_text(), guard);
    write_text(a.report + ".csv", report.to_csv(), guard);
    guard.commit();
  }
  out << report.to_text();
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  Common common;
  std::string model;
  std::string manifest;
  std::optional<std::size_t> cut;
  std::string out_path;
};

void cmd_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
  require_readable(a.model, "model");
  require_readable(a.manifest, "manifest");
  require_writable_parent(a.out_path);
  const Model model = load_model(a.model);
  const SampleSet set = load_samples(a.manifest);
  require_input_fits(model.spec(), set, "sample set");
  const std::size_t cut = a.cut ? *a.cut : flatten_index(model.spec());
  if (!a.common.quiet) err << "extracting layer " << cut << " features of " << set.size() << " images" << std::endl;
  const FeatureSet fs = extract_features(model, cut, set);
  OutputGuard guard;
  guard.add(a.out_path);
  save_features(fs, a.out_path);
  guard.commit();
  out << a.out_path << '\n' << fs.size() << " samples, dimension " << fs.dim << '\n';
}

// ---------------------------------------------------------------------------

struct InspectArgs {
  ArchOptions arch;
};

void cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const NetSpec spec = resolve_spec(a.arch, 256);
  const ParamCount pc = count_params(spec);
  const OpCount oc = count_ops(spec);
  out << "network " << spec.name << ", input " << spec.input.maps << "x" << spec.input.rows << "x" << spec.input.cols
      << '\n';
  out << std::left << std::setw(5) << "idx" << std::setw(9) << "kind" << std::setw(16) << "output" << std::right
      << std::setw(14) << "params" << std::setw(16) << "ops" << '\n';
  std::vector<std::uint64_t> ops(pc.layers.size(), 0);
  for (const LayerCount& l : oc.layers) ops[l.index] = l.ops;
  for (const LayerCount& l : pc.layers)
    out << std::left << std::setw(5) << l.index << std::setw(9) << l.kind << std::setw(16) << l.output.str()
        << std::right << std::setw(14) << l.params << std::setw(16) << ops[l.index] << '\n';
  const std::size_t flat = flatten_index(spec);
  out << "conv params " << pc.conv_total << '\n'
      << "fc params " << pc.fc_total << '\n'
      << "total params " << pc.total << '\n';
  if (flat < spec.layers.size()) out << "flatten width " << pc.layers[flat].output.num_elements() << '\n';
  out << "conv ops, per-layer sum (upper bound) " << oc.conv_total << '\n'
      << "conv ops, coarse estimate L*K1*|I1|*|F2| " << oc.coarse_estimate << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Deep-learning steganalysis: prepare data, train, evaluate, extract features, inspect networks"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "Crop covers, embed stegos and write a manifest");
  add_common(prep, pa.common);
  prep->add_option("--input-dir", pa.input_dir, "Directory of PGM covers (512x512 ones are split in four)");
  prep->add_option("--synthetic", pa.synthetic, "Generate n synthetic covers of width x height")->expected(3);
  prep->add_option("--out", pa.out_dir, "Output directory")->required();
  prep->add_option("--source", pa.source, "Source name recorded in the manifest");
  prep->add_option("--rate", pa.rate, "Embedding change rate")->capture_default_str();
  prep->add_option("--blur", pa.cover.blur, "Synthetic cover box-blur side")->capture_default_str();
  prep->add_option("--contrast", pa.cover.contrast, "Synthetic cover grey-level spread")->capture_default_str();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train a network on a manifest");
  add_common(tr, ta.common);
  add_arch(tr, ta.arch, false);
  add_train(tr, ta.train);
  tr->add_option("--manifest", ta.manifest, "Training manifest")->required();
  tr->add_option("--test-manifest", ta.test_manifest, "Held-out manifest evaluated after every epoch");
  tr->add_option("--model", ta.model_out, "Output model file")->required();
  tr->add_option("--history", ta.history_out, "Output history CSV (default: <model>.csv)");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a model, or run the multi-trial protocol");
  add_common(ev, ea.common);
  add_arch(ev, ea.arch, false);
  ev->add_option("--epochs", ea.train.epochs, "Protocol mode: passes over each training split");
  ev->add_option("--batch", ea.train.cfg.batch_size, "Protocol mode: mini-batch size")->capture_default_str();
  ev->add_option("--momentum", ea.train.cfg.momentum, "Protocol mode: SGD momentum")->capture_default_str();
  ev->add_option("--lr-weights", ea.train.cfg.lr_weights, "Protocol mode: weight learning rate")->capture_default_str();
  ev->add_option("--lr-bias", ea.train.cfg.lr_bias, "Protocol mode: bias learning rate")->capture_default_str();
  ev->add_option("--wd-conv", ea.train.cfg.wd_conv, "Protocol mode: conv weight decay")->capture_default_str();
  ev->add_option("--wd-fc", ea.train.cfg.wd_fc, "Protocol mode: fc weight decay")->capture_default_str();
  ev->add_option("--model", ea.model, "Trained model file");
  ev->add_option("--manifest", ea.manifest, "Test manifest (protocol mode: a different source means mismatch)");
  ev->add_option("--report", ea.report, "Write <prefix>.txt and <prefix>.csv");
  ev->add_option("--train-manifest", ea.train_manifest, "Protocol mode: training source");
  ev->add_option("--trials", ea.trials, "Protocol mode: number of trials")->capture_default_str();
  ev->add_option("--train-pairs", ea.train_pairs, "Protocol mode: training pairs per trial");
  ev->add_option("--test-pairs", ea.test_pairs, "Protocol mode: test pairs per trial (same source only)");
  ev->add_option("--classifier", ea.classifier, "Protocol mode: cnn or cut-ensemble")->capture_default_str();
  ev->add_option("--cut", ea.cut, "cut-ensemble: last layer kept (default: flatten)");
  ev->add_option("--learners", ea.ensemble.learners, "cut-ensemble: base learners")->capture_default_str();
  ev->add_option("--d-sub", ea.ensemble.d_sub, "cut-ensemble: subspace size (0 = ceil(sqrt(d))*8)")
      ->capture_default_str();
  ev->add_flag("--allow-even", ea.ensemble.allow_even, "cut-ensemble: accept an even learner count");

  ExtractArgs xa;
  auto* ex = app.add_subcommand("extract", "Write cut-network features of a manifest");
  add_common(ex, xa.common);
  ex->add_option("--model", xa.model, "Trained model file")->required();
  ex->add_option("--manifest", xa.manifest, "Images to featurize")->required();
  ex->add_option("--cut", xa.cut, "Last layer kept (default: flatten)");
  ex->add_option("--out", xa.out_path, "Output feature file")->required();

  InspectArgs ia;
  auto* in = app.add_subcommand("inspect", "Per-layer shapes, parameter and operation counts");
  add_arch(in, ia.arch, true);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    Common* common = nullptr;
    if (prep->parsed()) common = &pa.common;
    if (tr->parsed()) common = &ta.common;
    if (ev->parsed()) common = &ea.common;
    if (ex->parsed()) common = &xa.common;
    if (common) set_thread_count(common->threads);

    if (prep->parsed()) cmd_prepare(pa, out, err);
    if (tr->parsed()) cmd_train(ta, out, err);
    if (ev->parsed()) cmd_eval(ea, out, err);
    if (ex->parsed()) cmd_extract(xa, out, err);
    if (in->parsed()) cmd_inspect(ia, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace stegnet::cli
