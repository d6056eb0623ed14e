#include "stegnet/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "stegnet/model_io.hpp"
#include "stegnet/seed.hpp"

namespace stegnet {

std::vector<int> SampleSet::labels() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::vector<std::int64_t> SampleSet::pair_ids() const {
  std::vector<std::int64_t> out;
  std::unordered_set<std::int64_t> seen;
  for (const auto& s : samples)
    if (seen.insert(s.pair_id).second) out.push_back(s.pair_id);
  return out;
}

bool SampleSet::pair_complete() const {
  std::unordered_map<std::int64_t, int> mask;
  for (const auto& s : samples) {
    int& m = mask[s.pair_id];
    const int bit = s.label == kStego ? 2 : 1;
    if (m & bit) return false;
    m |= bit;
  }
  return std::all_of(mask.begin(), mask.end(), [](const auto& kv) { return kv.second == 3; });
}

Split make_splits(const SampleSet& set, std::size_t n_train_pairs, std::size_t n_test_pairs, std::uint64_t seed) {
  std::vector<std::int64_t> ids = set.pair_ids();
  if (n_train_pairs + n_test_pairs > ids.size())
    throw ArgumentError("split needs " + std::to_string(n_train_pairs + n_test_pairs) + " pairs, set has " +
                        std::to_string(ids.size()));
  std::sort(ids.begin(), ids.end());
  Rng rng(derive_seed(seed, "split"));
  std::shuffle(ids.begin(), ids.end(), rng);

  std::unordered_map<std::int64_t, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < set.samples.size(); ++i) members[set.samples[i].pair_id].push_back(i);

  auto gather = [&](std::size_t begin, std::size_t end) {
    SampleSet out;
    out.origin = set.origin;
    for (std::size_t p = begin; p < end; ++p) {
      std::vector<std::size_t> idx = members[ids[p]];
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t b) { return set.samples[a].label < set.samples[b].label; });
      for (const std::size_t i : idx) out.samples.push_back(set.samples[i]);
    }
    return out;
  };
  return {gather(0, n_train_pairs), gather(n_train_pairs, n_train_pairs + n_test_pairs)};
}

SampleSet synthetic_pairs(std::size_t n_pairs, std::size_t width, std::size_t height, double change_rate,
                          std::uint64_t seed, const SyntheticCoverOptions& cover, std::string origin) {
  SampleSet set;
  set.origin = std::move(origin);
  set.samples.reserve(2 * n_pairs);
  const std::uint64_t embed_base = derive_seed(seed, "embed");
  for (std::size_t i = 0; i < n_pairs; ++i) {
    GrayImage c = synthetic_cover(width, height, derive_seed(seed, "cover", i), cover);
    GrayImage s = lsb_match_embed(c, change_rate, embed_base ^ i);
    set.samples.push_back({std::move(c), kCover, static_cast<std::int64_t>(i)});
    set.samples.push_back({std::move(s), kStego, static_cast<std::int64_t>(i)});
  }
  return set;
}

// ---------------------------------------------------------------------------

Manifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrc::open_failed, path);
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      constexpr std::string_view key = "# source=";
      if (line.rfind(key, 0) == 0) m.source = line.substr(key.size());
      continue;
    }
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
      throw IoError(IoErrc::malformed, path + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields");
    ManifestEntry e;
    const auto [p, ec] = std::from_chars(line.data(), line.data() + t1, e.pair_id);
    if (ec != std::errc() || p != line.data() + t1)
      throw IoError(IoErrc::malformed, path + ":" + std::to_string(line_no) + ": bad pair id");
    e.cover = line.substr(t1 + 1, t2 - t1 - 1);
    e.stego = line.substr(t2 + 1);
    if (e.cover.empty() || e.stego.empty())
      throw IoError(IoErrc::malformed, path + ":" + std::to_string(line_no) + ": empty path");
    m.entries.push_back(std::move(e));
  }
  return m;
}

std::string format_manifest(const Manifest& manifest) {
  std::ostringstream os;
  if (!manifest.source.empty()) os << "# source=" << manifest.source << '\n';
  for (const auto& e : manifest.entries) os << e.pair_id << '\t' << e.cover << '\t' << e.stego << '\n';
  return os.str();
}

void write_manifest(const Manifest& manifest, const std::string& path) {
  const std::string text = format_manifest(manifest);
  detail::write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

SampleSet load_samples(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const Manifest m = read_manifest(manifest_path);
  const fs::path dir = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& p) {
    const fs::path fp(p);
    return (fp.is_absolute() ? fp : dir / fp).string();
  };
  SampleSet set;
  set.origin = m.source.empty() ? fs::path(manifest_path).stem().string() : m.source;
  for (const auto& e : m.entries) {
    set.samples.push_back({read_pgm(resolve(e.cover)), kCover, e.pair_id});
    set.samples.push_back({read_pgm(resolve(e.stego)), kStego, e.pair_id});
  }
  if (!set.pair_complete()) throw IoError(IoErrc::malformed, manifest_path + ": duplicate pair ids");
  return set;
}

}  // namespace stegnet
