#pragma once

#include <cstdarg>

namespace edm::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3 };

void set_level(Level lvl);
Level level();

void vwrite(Level lvl, const char* fmt, std::va_list args);

#if defined(__GNUC__)
#define EDM_PRINTF_ATTR(a, b) __attribute__((format(printf, a, b)))
#else
#define EDM_PRINTF_ATTR(a, b)
#endif

void debug(const char* fmt, ...) EDM_PRINTF_ATTR(1, 2);
void info(const char* fmt, ...) EDM_PRINTF_ATTR(1, 2);
void warn(const char* fmt, ...) EDM_PRINTF_ATTR(1, 2);
void error(const char* fmt, ...) EDM_PRINTF_ATTR(1, 2);

}  // namespace edm::log
