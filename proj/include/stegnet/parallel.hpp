#pragma once

#include <cstddef>
#include <functional>

namespace stegnet {

/// Worker cap for parallel_for; 0 means hardware concurrency.
void set_thread_count(std::size_t n);
std::size_t thread_count();

/// Runs fn(i) for i in [0, n). Iterations must write disjoint outputs;
/// the first exception thrown by any iteration is rethrown.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace stegnet
