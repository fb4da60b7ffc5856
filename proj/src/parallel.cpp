#include "latefuse/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace latefuse {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("LATEFUSE_THREADS")) {
    try {
      const int cap = std::stoi(env);
      if (cap > 0) return cap;
    } catch (const std::exception&) {
      // fall through to the OpenMP default
    }
  }
  return omp_get_max_threads();
}

}  // namespace latefuse
