#pragma once

// Minimal fork-join loop over independent indices.

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace qkdv {

/// Worker count used when a caller passes 0; set from the command line or environment.
int default_threads();
void set_default_threads(int n);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0: default_threads()).
/// The first exception thrown by any body is rethrown after all workers join.
void parallel_for(int n, int threads, const std::function<void(int)>& body);

}  // namespace qkdv
