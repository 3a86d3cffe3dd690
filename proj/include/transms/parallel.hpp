#pragma once

#include <functional>

#include "transms/common.hpp"

namespace transms {

/// Worker count: TRANSMS_THREADS if set and positive, else hardware concurrency.
int thread_count();

/// Runs body(i) for i in [0, n) over thread_count() workers. Each index is
/// handled by exactly one worker; bodies must write to disjoint outputs.
/// The first exception thrown by any body is rethrown.
void parallel_for(Index n, const std::function<void(Index)>& body);

}  // namespace transms
