#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stegnet/image.hpp"

namespace stegnet {

enum Label : int { kCover = 0, kStego = 1 };

struct Sample {
  GrayImage image;
  int label = kCover;
  std::int64_t pair_id = 0;
};

/// Cover/stego samples from one source. A pair-complete set holds every
/// pair_id exactly twice, once per label.
struct SampleSet {
  std::vector<Sample> samples;
  std::string origin;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::vector<int> labels() const;
  /// Distinct pair ids in order of first appearance.
  std::vector<std::int64_t> pair_ids() const;
  bool pair_complete() const;
};

struct Split {
  SampleSet train;
  SampleSet test;
};

/// Seeded pair-preserving partition: n_train_pairs and n_test_pairs
/// disjoint pairs. Throws ArgumentError when the set has too few pairs.
Split make_splits(const SampleSet& set, std::size_t n_train_pairs, std::size_t n_test_pairs,
                  std::uint64_t seed);

/// `n_pairs` synthetic covers and their embedded stegos, generated in
/// memory. Cover i uses derive_seed(seed, "cover", i); its stego uses
/// (embedding base seed) XOR i.
SampleSet synthetic_pairs(std::size_t n_pairs, std::size_t width, std::size_t height, double change_rate,
                          std::uint64_t seed, const SyntheticCoverOptions& cover = {},
                          std::string origin = "synthetic");

// ---------------------------------------------------------------------------
// Manifest: `pair_id<TAB>cover_path<TAB>stego_path` per line, LF endings.
// Relative paths resolve against the manifest's directory. A line
// `# source=<name>` names the data source; other `#` lines are comments.

struct ManifestEntry {
  std::int64_t pair_id = 0;
  std::string cover;
  std::string stego;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  std::string source;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::string& path);
std::string format_manifest(const Manifest& manifest);
void write_manifest(const Manifest& manifest, const std::string& path);

/// Reads every image a manifest names. The set's origin is the manifest's
/// source line, or the manifest file stem if it has none.
SampleSet load_samples(const std::string& manifest_path);

}  // namespace stegnet
