#pragma once

#include <cstddef>
#include <functional>

namespace ddcnn {

/// Worker count used by parallel_for. Defaults to the machine's hardware
/// concurrency; values below 1 are treated as 1.
void set_num_threads(int n) noexcept;
int num_threads() noexcept;

/// Runs body(i) for i in [0, count). Work is split into contiguous chunks,
/// so callers that write only to index-owned slots get results independent
/// of the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

}  // namespace ddcnn
