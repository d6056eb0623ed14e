#pragma once

#include <span>

namespace stegnet {

struct Confusion {
  std::size_t false_alarms = 0;        // cover called stego
  std::size_t missed_detections = 0;   // stego called cover
  std::size_t total = 0;

  double p_error() const { return total ? double(false_alarms + missed_detections) / double(total) : 0.0; }
};

/// Counts errors of `predictions` against `truth` (labels 0 = cover,
/// 1 = stego). Throws ArgumentError on a length mismatch.
Confusion confusion(std::span<const int> predictions, std::span<const int> truth);

/// (false alarms + missed detections) / N.
double p_error(std::span<const int> predictions, std::span<const int> truth);

}  // namespace stegnet
