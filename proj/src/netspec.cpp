#include "stegnet/netspec.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace stegnet {

namespace {

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};
template <class... Fs>
Overloaded(Fs...) -> Overloaded<Fs...>;

bool is_spatial(const LayerSpec& l) {
  return std::holds_alternative<HighPassSpec>(l) || std::holds_alternative<ConvSpec>(l) ||
         std::holds_alternative<PadSpec>(l) || std::holds_alternative<PoolSpec>(l) ||
         std::holds_alternative<LrnSpec>(l);
}

std::string at_layer(std::size_t i, const LayerSpec& l) {
  return "layer " + std::to_string(i) + " (" + std::string(layer_kind(l)) + ")";
}

Shape layer_output(const LayerSpec& layer, const Shape& in) {
  auto spatial = [&](const char* who) {
    if (in.rank() != 3) throw ShapeError(std::string(who) + " needs [maps, H, W] input, got " + in.str());
  };
  return std::visit(
      Overloaded{
          [&](const HighPassSpec&) {
            spatial("high-pass filter");
            if (in[1] < 5 || in[2] < 5) throw ShapeError("high-pass filter needs at least 5x5, got " + in.str());
            return Shape{in[0], in[1] - 4, in[2] - 4};
          },
          [&](const ConvSpec& c) {
            spatial("conv");
            if (c.filters == 0) throw ShapeError("conv needs at least one filter");
            return Shape{c.filters, out_size(in[1], c.kernel, c.stride, c.pad, c.mode),
                         out_size(in[2], c.kernel, c.stride, c.pad, c.mode)};
          },
          [&](const PadSpec& p) {
            spatial("pad");
            return Shape{in[0], in[1] + 2 * p.amount, in[2] + 2 * p.amount};
          },
          [&](const ActivationSpec& a) {
            validate(a);
            return in;
          },
          [&](const PoolSpec& p) {
            spatial("pool");
            const Extent2 o = pool_output(p, {in[1], in[2]});
            return Shape{in[0], o.rows, o.cols};
          },
          [&](const LrnSpec& l) {
            spatial("lrn");
            validate(l);
            return in;
          },
          [&](const FlattenSpec&) {
            spatial("flatten");
            return Shape{in.num_elements()};
          },
          [&](const FcSpec& f) {
            if (in.rank() != 1) throw ShapeError("fc needs a flattened vector, got " + in.str());
            if (f.out == 0) throw ShapeError("fc needs a positive width");
            return Shape{f.out};
          },
          [&](const SoftmaxSpec&) {
            if (in.rank() != 1) throw ShapeError("softmax needs a vector, got " + in.str());
            return in;
          },
      },
      layer);
}

}  // namespace

std::string_view layer_kind(const LayerSpec& layer) {
  static constexpr std::string_view names[] = {"hpf", "conv", "pad", "act", "pool",
                                               "lrn", "flatten", "fc", "softmax"};
  return names[layer.index()];
}

std::vector<Shape> propagate_shapes(const NetSpec& spec) {
  if (spec.input.maps == 0 || spec.input.rows == 0 || spec.input.cols == 0)
    throw ShapeError("network input extents must be positive");
  Shape cur{spec.input.maps, spec.input.rows, spec.input.cols};
  std::vector<Shape> out;
  out.reserve(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      cur = layer_output(spec.layers[i], cur);
    } catch (const Error& e) {
      throw ShapeError(at_layer(i, spec.layers[i]) + ": " + e.what());
    }
    out.push_back(cur);
  }
  return out;
}

std::size_t flatten_index(const NetSpec& spec) {
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (std::holds_alternative<FlattenSpec>(spec.layers[i])) return i;
  return spec.layers.size();
}

void validate(const NetSpec& spec) {
  const std::vector<Shape> shapes = propagate_shapes(spec);
  const auto count = [&](auto pred) { return std::count_if(spec.layers.begin(), spec.layers.end(), pred); };
  if (count([](const LayerSpec& l) { return std::holds_alternative<FlattenSpec>(l); }) != 1)
    throw ShapeError("network must contain exactly one flatten layer");
  if (count([](const LayerSpec& l) { return std::holds_alternative<SoftmaxSpec>(l); }) != 1 ||
      !std::holds_alternative<SoftmaxSpec>(spec.layers.back()))
    throw ShapeError("network must end with its only softmax layer");
  const std::size_t flat = flatten_index(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (i > flat && is_spatial(l)) throw ShapeError(at_layer(i, l) + " comes after flatten");
    if (i < flat && std::holds_alternative<FcSpec>(l)) throw ShapeError(at_layer(i, l) + " comes before flatten");
  }
  if (shapes.back() != Shape{2}) throw ShapeError("network must end in a 2-vector, got " + shapes.back().str());
}

NetSpec prefix(const NetSpec& spec, std::size_t count) {
  if (count > spec.layers.size())
    throw ArgumentError("cut after " + std::to_string(count) + " layers of " + std::to_string(spec.layers.size()));
  NetSpec out = spec;
  out.layers.resize(count);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> preset_names() { return {"pibre-cnn", "qian-cnn", "pibre-fnn"}; }

namespace {

std::vector<std::size_t> pick(const std::vector<std::size_t>& given, std::vector<std::size_t> fallback,
                              const char* what) {
  if (given.empty()) return fallback;
  if (given.size() != fallback.size())
    throw ArgumentError(std::string(what) + ": expected " + std::to_string(fallback.size()) + " values");
  if (std::find(given.begin(), given.end(), 0) != given.end())
    throw ArgumentError(std::string(what) + ": values must be positive");
  return given;
}

void append_head(NetSpec& spec, const std::vector<std::size_t>& hidden) {
  spec.layers.emplace_back(FlattenSpec{});
  for (const std::size_t width : hidden) {
    spec.layers.emplace_back(FcSpec{width, true});
    spec.layers.emplace_back(ActivationSpec{ActivationKind::relu});
  }
  spec.layers.emplace_back(FcSpec{2, false});
  spec.layers.emplace_back(SoftmaxSpec{});
}

}  // namespace

NetSpec preset(std::string_view name, const PresetOptions& options) {
  const std::size_t n = options.input_size;
  if (n != 256 && n != 32) throw ArgumentError("preset input size must be 256 or 32, got " + std::to_string(n));
  NetSpec spec;
  spec.name = std::string(name);
  spec.input = {1, n, n};
  spec.layers.emplace_back(HighPassSpec{});

  if (name == "pibre-cnn") {
    const auto filters = pick(options.conv_filters, {64, 16}, "pibre-cnn filters");
    const auto hidden = pick(options.fc_hidden, {1000, 1000}, "pibre-cnn fc widths");
    const ActivationSpec relu{ActivationKind::relu};
    spec.layers.emplace_back(ConvSpec{filters[0], 7, 2, 3, SizeMode::ceil});
    spec.layers.emplace_back(relu);
    spec.layers.emplace_back(LrnSpec{});
    spec.layers.emplace_back(PadSpec{2});
    spec.layers.emplace_back(ConvSpec{filters[1], 5, 1, 0, SizeMode::floor});
    spec.layers.emplace_back(relu);
    spec.layers.emplace_back(LrnSpec{});
    append_head(spec, hidden);
  } else if (name == "qian-cnn") {
    const auto filters = pick(options.conv_filters, {16, 16, 16, 16, 16}, "qian-cnn filters");
    const auto hidden = pick(options.fc_hidden, {128, 128}, "qian-cnn fc widths");
    static constexpr std::size_t kernels[] = {5, 3, 3, 3, 5};
    // Full scale sweeps valid convolutions; the 32x32 variant keeps map
    // sizes with "same" padding so all five stages fit.
    const bool desk = n == 32;
    const PoolSpec pool{PoolKind::average, 3, 2, desk ? 1u : 0u, SizeMode::ceil};
    for (std::size_t l = 0; l < 5; ++l) {
      spec.layers.emplace_back(ConvSpec{filters[l], kernels[l], 1, desk ? kernels[l] / 2 : 0, SizeMode::floor});
      spec.layers.emplace_back(ActivationSpec{ActivationKind::gaussian, 1.0});
      spec.layers.emplace_back(pool);
    }
    append_head(spec, hidden);
  } else if (name == "pibre-fnn") {
    if (!options.conv_filters.empty()) throw ArgumentError("pibre-fnn has no conv layers");
    const auto hidden = pick(options.fc_hidden, {2000, 1000}, "pibre-fnn fc widths");
    append_head(spec, hidden);
  } else {
    throw ArgumentError("unknown preset '" + std::string(name) + "'");
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------

ParamCount count_params(const NetSpec& spec) {
  const std::vector<Shape> shapes = propagate_shapes(spec);
  ParamCount pc;
  Shape in{spec.input.maps, spec.input.rows, spec.input.cols};
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    LayerCount lc{i, std::string(layer_kind(spec.layers[i])), shapes[i], 0, 0};
    if (const auto* c = std::get_if<ConvSpec>(&spec.layers[i])) {
      lc.params = static_cast<std::uint64_t>(c->filters) * (1 + in[0] * c->kernel * c->kernel);
      pc.conv_total += lc.params;
    } else if (const auto* f = std::get_if<FcSpec>(&spec.layers[i])) {
      lc.params = static_cast<std::uint64_t>(f->out) * in[0] + (f->bias ? f->out : 0);
      pc.fc_total += lc.params;
    }
    pc.total += lc.params;
    pc.layers.push_back(std::move(lc));
    in = shapes[i];
  }
  return pc;
}

OpCount count_ops(const NetSpec& spec) {
  const std::vector<Shape> shapes = propagate_shapes(spec);
  OpCount oc;
  Shape in{spec.input.maps, spec.input.rows, spec.input.cols};
  std::vector<std::pair<const ConvSpec*, Shape>> convs;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (const auto* c = std::get_if<ConvSpec>(&spec.layers[i])) {
      const std::uint64_t area = static_cast<std::uint64_t>(in[1]) * in[2];
      const std::uint64_t weights = static_cast<std::uint64_t>(in[0]) * c->kernel * c->kernel;
      LayerCount lc{i, "conv", shapes[i], 0, c->filters * area * (1 + weights)};
      oc.conv_total += lc.ops;
      oc.layers.push_back(std::move(lc));
      convs.emplace_back(c, in);
    }
    in = shapes[i];
  }
  if (!convs.empty()) {
    const auto& [first, first_in] = convs.front();
    const auto& [second, second_in] = convs.size() > 1 ? convs[1] : convs.front();
    oc.coarse_estimate = static_cast<std::uint64_t>(convs.size()) * first->filters *
                         (static_cast<std::uint64_t>(first_in[1]) * first_in[2]) *
                         (static_cast<std::uint64_t>(second_in[0]) * second->kernel * second->kernel);
  }
  return oc;
}

// ---------------------------------------------------------------------------
// Text format.

namespace {

std::string fmt_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const char* mode_name(SizeMode m) { return m == SizeMode::ceil ? "ceil" : "floor"; }

const char* activation_name(ActivationKind k) {
  switch (k) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::gaussian: return "gaussian";
    case ActivationKind::absolute: return "absolute";
    case ActivationKind::sine: return "sine";
    case ActivationKind::identity: return "identity";
  }
  return "?";
}

std::string layer_line(const LayerSpec& layer) {
  std::ostringstream os;
  os << layer_kind(layer);
  std::visit(Overloaded{
                 [](const HighPassSpec&) {},
                 [&](const ConvSpec& c) {
                   os << " filters=" << c.filters << " kernel=" << c.kernel << " stride=" << c.stride
                      << " pad=" << c.pad << " mode=" << mode_name(c.mode);
                 },
                 [&](const PadSpec& p) { os << " amount=" << p.amount; },
                 [&](const ActivationSpec& a) {
                   os << " kind=" << activation_name(a.kind);
                   if (a.kind == ActivationKind::gaussian)
                     os << " sigma=" << fmt_double(a.sigma) << " literal=" << (a.literal_gaussian ? 1 : 0);
                 },
                 [&](const PoolSpec& p) {
                   os << " kind=" << (p.kind == PoolKind::average ? "average" : "maximum") << " window=" << p.window
                      << " stride=" << p.stride << " pad=" << p.pad << " mode=" << mode_name(p.mode);
                 },
                 [&](const LrnSpec& l) {
                   os << " alpha=" << fmt_double(l.alpha) << " beta=" << fmt_double(l.beta) << " size=" << l.size;
                 },
                 [](const FlattenSpec&) {},
                 [&](const FcSpec& f) { os << " out=" << f.out << " bias=" << (f.bias ? 1 : 0); },
                 [](const SoftmaxSpec&) {},
             },
             layer);
  return os.str();
}

class LineParser {
 public:
  LineParser(std::size_t line_no, std::string_view kind, std::map<std::string, std::string> kv)
      : line_(line_no), kind_(kind), kv_(std::move(kv)) {}

  std::size_t size(const std::string& key, std::optional<std::size_t> fallback = std::nullopt) {
    const auto v = take(key);
    if (!v) return required(key, fallback);
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) fail("bad integer for " + key + ": " + *v);
    return out;
  }

  double real(const std::string& key, std::optional<double> fallback = std::nullopt) {
    const auto v = take(key);
    if (!v) return required(key, fallback);
    double out = 0;
    const auto [p, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc() || p != v->data() + v->size()) fail("bad number for " + key + ": " + *v);
    return out;
  }

  bool flag(const std::string& key, bool fallback) {
    const auto v = take(key);
    if (!v) return fallback;
    if (*v == "1" || *v == "true") return true;
    if (*v == "0" || *v == "false") return false;
    fail("bad flag for " + key + ": " + *v);
  }

  SizeMode mode() {
    const auto v = take("mode");
    if (!v || *v == "floor") return SizeMode::floor;
    if (*v == "ceil") return SizeMode::ceil;
    fail("mode must be floor or ceil");
  }

  std::string word(const std::string& key) {
    auto v = take(key);
    if (!v) fail("missing " + key);
    return *v;
  }

  void finish() {
    if (!kv_.empty()) fail("unknown key '" + kv_.begin()->first + "' for " + std::string(kind_));
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw IoError(IoErrc::malformed, "architecture line " + std::to_string(line_) + ": " + msg);
  }

 private:
  std::optional<std::string> take(const std::string& key) {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return std::nullopt;
    std::string v = it->second;
    kv_.erase(it);
    return v;
  }

  template <typename V>
  V required(const std::string& key, std::optional<V> fallback) const {
    if (!fallback) fail("missing " + key);
    return *fallback;
  }

  std::size_t line_;
  std::string_view kind_;
  std::map<std::string, std::string> kv_;
};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string to_text(const NetSpec& spec) {
  std::ostringstream os;
  if (!spec.name.empty()) os << "name " << spec.name << '\n';
  if (!spec.source.empty()) os << "source " << spec.source << '\n';
  os << "input maps=" << spec.input.maps << " rows=" << spec.input.rows << " cols=" << spec.input.cols << '\n';
  for (const auto& layer : spec.layers) os << layer_line(layer) << '\n';
  return os.str();
}

NetSpec parse_netspec(std::string_view text) {
  NetSpec spec;
  bool have_input = false;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    const auto sp = line.find_first_of(" \t");
    const std::string_view kind = line.substr(0, sp);
    const std::string_view rest = sp == std::string_view::npos ? std::string_view{} : trim(line.substr(sp));
    if (kind == "name" || kind == "source") {
      (kind == "name" ? spec.name : spec.source) = std::string(rest);
      continue;
    }

    std::map<std::string, std::string> kv;
    std::istringstream tokens{std::string(rest)};
    for (std::string tok; tokens >> tok;) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos || eq == 0)
        throw IoError(IoErrc::malformed, "architecture line " + std::to_string(line_no) + ": expected key=value, got " + tok);
      if (!kv.emplace(tok.substr(0, eq), tok.substr(eq + 1)).second)
        throw IoError(IoErrc::malformed, "architecture line " + std::to_string(line_no) + ": duplicate key " + tok);
    }
    LineParser p(line_no, kind, std::move(kv));

    if (kind == "input") {
      spec.input = {p.size("maps", 1), p.size("rows"), p.size("cols")};
      have_input = true;
    } else if (kind == "hpf") {
      spec.layers.emplace_back(HighPassSpec{});
    } else if (kind == "conv") {
      ConvSpec c;
      c.filters = p.size("filters");
      c.kernel = p.size("kernel");
      c.stride = p.size("stride", 1);
      c.pad = p.size("pad", 0);
      c.mode = p.mode();
      spec.layers.emplace_back(c);
    } else if (kind == "pad") {
      spec.layers.emplace_back(PadSpec{p.size("amount")});
    } else if (kind == "act") {
      ActivationSpec a;
      const std::string k = p.word("kind");
      if (k == "relu") a.kind = ActivationKind::relu;
      else if (k == "gaussian") a.kind = ActivationKind::gaussian;
      else if (k == "absolute") a.kind = ActivationKind::absolute;
      else if (k == "sine") a.kind = ActivationKind::sine;
      else if (k == "identity") a.kind = ActivationKind::identity;
      else p.fail("unknown activation " + k);
      if (a.kind == ActivationKind::gaussian) {
        a.sigma = p.real("sigma", 1.0);
        a.literal_gaussian = p.flag("literal", false);
      }
      spec.layers.emplace_back(a);
    } else if (kind == "pool") {
      PoolSpec ps;
      const std::string k = p.word("kind");
      if (k == "average") ps.kind = PoolKind::average;
      else if (k == "maximum") ps.kind = PoolKind::maximum;
      else p.fail("unknown pooling " + k);
      ps.window = p.size("window");
      ps.stride = p.size("stride", ps.window);
      ps.pad = p.size("pad", 0);
      ps.mode = p.mode();
      spec.layers.emplace_back(ps);
    } else if (kind == "lrn") {
      const LrnSpec d;
      spec.layers.emplace_back(LrnSpec{p.real("alpha", d.alpha), p.real("beta", d.beta), p.size("size", d.size)});
    } else if (kind == "flatten") {
      spec.layers.emplace_back(FlattenSpec{});
    } else if (kind == "fc") {
      spec.layers.emplace_back(FcSpec{p.size("out"), p.flag("bias", true)});
    } else if (kind == "softmax") {
      spec.layers.emplace_back(SoftmaxSpec{});
    } else {
      p.fail("unknown layer kind '" + std::string(kind) + "'");
    }
    p.finish();
  }
  if (!have_input) throw IoError(IoErrc::malformed, "architecture has no input line");
  return spec;
}

NetSpec load_netspec(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::open_failed, path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_netspec(ss.str());
}

}  // namespace stegnet
