#include "ppnet/parallel.hpp"

#include <cstdlib>
#include <string>

namespace ppnet {

int default_threads() {
  if (const char* env = std::getenv("PPNET_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (const std::exception&) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace ppnet
