#ifndef DMIA_PARALLEL_H_
#define DMIA_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace dmia {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Work is claimed from
// a shared counter, so callers must write results into slots keyed by i.
// The first exception thrown by any task is rethrown after all workers join.
void parallel_for(std::size_t n, int threads,
                  const std::function<void(std::size_t)>& fn);

// --threads value when positive, otherwise DMIA_THREADS, otherwise 1.
int resolve_thread_count(int requested);

}  // namespace dmia

#endif  // DMIA_PARALLEL_H_
