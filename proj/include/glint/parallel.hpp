#pragma once

#include <cstddef>
#include <functional>

namespace glint {

/// Worker count used by parallel_for; 0 selects hardware concurrency.
void set_thread_count(unsigned n);
unsigned thread_count();

/// Runs f(i) for i in [0, n), dynamically scheduled. Callers must make the
/// result independent of which thread ran which index.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace glint
