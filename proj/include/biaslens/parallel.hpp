#pragma once

#include <cstddef>
#include <functional>

namespace biaslens {

/// Worker count: BIASLENS_THREADS if set and > 0, else hardware concurrency.
std::size_t thread_count();

/// Runs body(i) for i in [0, n). Each index must write only its own output
/// slot; with that discipline the result is independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace biaslens
