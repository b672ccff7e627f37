#pragma once

#include <cstdint>
#include <functional>

namespace pmf {

/// Set the worker count used by parallel loops (1 = fully sequential).
/// Results are independent of this setting by construction: parallel
/// sections either write disjoint slots or reduce with order-insensitive
/// combines.
void set_thread_count(int n);
int thread_count();

/// Run fn(i) for i in [0, n). Work is split into fixed-size chunks so the
/// iteration-to-chunk mapping does not depend on the worker count.
void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn);

/// Chunked variant: fn(begin, end) over disjoint ranges.
void parallel_for_ranges(std::int64_t n,
                         const std::function<void(std::int64_t, std::int64_t)>& fn);

}  // namespace pmf
