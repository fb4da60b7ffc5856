#pragma once

namespace latefuse {

/// Worker count to use for a request of `requested` threads: 0 means the
/// LATEFUSE_THREADS environment cap if set and non-zero, otherwise the
/// OpenMP default.
int resolve_threads(int requested);

}  // namespace latefuse
