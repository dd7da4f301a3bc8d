#include "edm/log.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <mutex>

namespace edm::log {

namespace {
std::atomic<Level> g_level{Level::info};
std::mutex g_mu;

const char* tag(Level lvl) {
  switch (lvl) {
    case Level::debug: return "D";
    case Level::info: return "I";
    case Level::warn: return "W";
    case Level::error: return "E";
  }
  return "?";
}
}  // namespace

void set_level(Level lvl) { g_level.store(lvl, std::memory_order_relaxed); }
Level level() { return g_level.load(std::memory_order_relaxed); }

void vwrite(Level lvl, const char* fmt, std::va_list args) {
  if (lvl < level()) return;
  using namespace std::chrono;
  auto now = duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
  std::lock_guard lock(g_mu);
  std::fprintf(stderr, "[%lld.%03lld %s] ", static_cast<long long>(now / 1000),
               static_cast<long long>(now % 1000), tag(lvl));
  std::vfprintf(stderr, fmt, args);
  std::fputc('\n', stderr);
}

#define EDM_LOG_IMPL(name, lvl)                \
  void name(const char* fmt, ...) {            \
    std::va_list args;                         \
    va_start(args, fmt);                       \
    vwrite(lvl, fmt, args);                    \
    va_end(args);                              \
  }

EDM_LOG_IMPL(debug, Level::debug)
EDM_LOG_IMPL(info, Level::info)
EDM_LOG_IMPL(warn, Level::warn)
EDM_LOG_IMPL(error, Level::error)

#undef EDM_LOG_IMPL

}  // namespace edm::log
