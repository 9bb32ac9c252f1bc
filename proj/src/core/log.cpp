#include "fastgan/log.hpp"

#include <atomic>
#include <cstdio>

namespace fastgan::log {
namespace {
std::atomic<Level> g_level{Level::info};
}

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level level, std::string_view msg) {
  static constexpr const char* kTags[] = {"debug", "info", "warn", "error"};
  std::fprintf(stderr, "[%s] %.*s\n", kTags[static_cast<int>(level)], static_cast<int>(msg.size()),
               msg.data());
}

}  // namespace fastgan::log
