#pragma once

#include <cstddef>
#include <functional>

namespace widthlab {

// Worker cap used when a call site passes threads = 0. Set once by the CLI.
void set_global_thread_cap(int threads);
int global_thread_cap();

// Runs body(0..n-1) on a bounded pool. Each index is an independent task that
// writes only to its own slot, so the result is identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  int threads = 0);

}  // namespace widthlab
