#include "redpsm/parallel.hpp"

#include <cstdlib>
#include <string>

namespace redpsm {

std::size_t max_threads() {
  if (const char* env = std::getenv("RPSM_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<std::size_t>(v);
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace redpsm
