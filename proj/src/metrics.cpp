#include "stegnet/metrics.hpp"

#include <string>

#include "stegnet/error.hpp"

namespace stegnet {

Confusion confusion(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size())
    throw ArgumentError("p_error: " + std::to_string(predictions.size()) + " predictions for " +
                        std::to_string(truth.size()) + " labels");
  Confusion c;
  c.total = truth.size();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 0 && predictions[i] != 0) ++c.false_alarms;
    if (truth[i] != 0 && predictions[i] == 0) ++c.missed_detections;
  }
  return c;
}

double p_error(std::span<const int> predictions, std::span<const int> truth) {
  return confusion(predictions, truth).p_error();
}

}  // namespace stegnet
