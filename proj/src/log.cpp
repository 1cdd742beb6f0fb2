#include "curate/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace curate::log {
namespace {
std::atomic<Level> g_level{Level::warn};
std::mutex g_mutex;

std::string_view name(Level l) {
  switch (l) {
    case Level::debug: return "debug";
    case Level::info: return "info";
    case Level::warn: return "warning";
    case Level::error: return "error";
    case Level::off: break;
  }
  return "";
}
}  // namespace

void set_level(Level l) { g_level = l; }
Level level() { return g_level; }

void write(Level at, std::string_view msg) {
  if (at < g_level.load() || at == Level::off) return;
  std::lock_guard lock(g_mutex);
  std::cerr << "curate: " << name(at) << ": " << msg << '\n';
}

}  // namespace curate::log
