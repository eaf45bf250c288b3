#include "tartan/parallel.hpp"

#include <cstdlib>
#include <string>

namespace tartan {

std::size_t resolve_threads(std::optional<std::size_t> flag) {
  if (flag && *flag > 0) return *flag;
  if (const char* env = std::getenv("TARTAN_THREADS")) {
    try {
      const auto n = std::stoul(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return 1;
}

}  // namespace tartan
