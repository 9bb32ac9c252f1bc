#include "fastgan/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

namespace fastgan {
namespace {

int initial_threads() {
  int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("FASTGAN_THREADS")) {
    try {
      int cap = std::stoi(env);
      if (cap >= 1) return std::min(cap, hw);
    } catch (...) {
    }
  }
  return hw;
}

std::atomic<int> g_threads{initial_threads()};

}  // namespace

int thread_count() { return g_threads; }
void set_thread_count(int n) { g_threads = std::max(1, n); }

}  // namespace fastgan
