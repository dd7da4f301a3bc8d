#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace edm::strings {

std::vector<std::string_view> split(std::string_view s, char sep);

// Parsers return nullopt on any trailing garbage or range error.
std::optional<int64_t> to_i64(std::string_view s);
std::optional<uint64_t> to_u64(std::string_view s);
std::optional<double> to_double(std::string_view s);

std::string format_double(double v, int decimals);

bool starts_with(std::string_view s, std::string_view prefix);

// "key=a;other=b" -> lookup of "key". Values may be empty.
std::optional<std::string_view> kv_get(std::string_view s, std::string_view key);

}  // namespace edm::strings
