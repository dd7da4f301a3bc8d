#include "edm/strings.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace edm::strings {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

namespace {
// strtoll-family needs a NUL-terminated buffer.
bool copy_token(std::string_view s, char* buf, size_t cap) {
  if (s.empty() || s.size() >= cap) return false;
  std::memcpy(buf, s.data(), s.size());
  buf[s.size()] = '\0';
  return true;
}
}  // namespace

std::optional<int64_t> to_i64(std::string_view s) {
  char buf[32];
  if (!copy_token(s, buf, sizeof buf)) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(buf, &end, 10);
  if (errno != 0 || end != buf + s.size()) return std::nullopt;
  return static_cast<int64_t>(v);
}

std::optional<uint64_t> to_u64(std::string_view s) {
  char buf[32];
  if (!copy_token(s, buf, sizeof buf)) return std::nullopt;
  if (buf[0] == '-') return std::nullopt;
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(buf, &end, 10);
  if (errno != 0 || end != buf + s.size()) return std::nullopt;
  return static_cast<uint64_t>(v);
}

std::optional<double> to_double(std::string_view s) {
  char buf[64];
  if (!copy_token(s, buf, sizeof buf)) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(buf, &end);
  if (errno != 0 || end != buf + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && s.substr(0, prefix.size()) == prefix;
}

std::optional<std::string_view> kv_get(std::string_view s, std::string_view key) {
  for (auto part : split(s, ';')) {
    size_t eq = part.find('=');
    if (eq == std::string_view::npos) continue;
    if (part.substr(0, eq) == key) return part.substr(eq + 1);
  }
  return std::nullopt;
}

}  // namespace edm::strings
