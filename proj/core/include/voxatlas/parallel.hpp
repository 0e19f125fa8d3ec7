#pragma once

#include <cstddef>
#include <functional>

namespace voxatlas {

/// Worker count from VOXATLAS_WORKERS, falling back to hardware concurrency.
std::size_t worker_count();

/// Runs fn(i) for i in [0, n). Work is split into contiguous chunks; callers
/// must ensure iterations write disjoint state so results are independent of
/// the partitioning.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace voxatlas
