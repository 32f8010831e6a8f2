#pragma once

#include <cstddef>
#include <functional>

namespace ctlp {

// Runs body(i) for i in [0, n) over up to `threads` workers (0 = hardware
// concurrency). Each index is handled exactly once; callers keep per-index
// work independent so results never depend on the worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body,
                  unsigned threads = 0);

}  // namespace ctlp
