#include "edm/strings.hpp"

#include <cstdint>

#include "doctest.h"

using namespace edm::strings;

TEST_CASE("split keeps empty tokens") {
  auto v = split("a,b,,c", ',');
  REQUIRE(v.size() == 4);
  CHECK(v[0] == "a");
  CHECK(v[1] == "b");
  CHECK(v[2] == "");
  CHECK(v[3] == "c");

  CHECK(split("", ',') == std::vector<std::string_view>{""});
  CHECK(split("x", ',') == std::vector<std::string_view>{"x"});
  CHECK(split("a,", ',') == std::vector<std::string_view>{"a", ""});
  CHECK(split(",a", ',') == std::vector<std::string_view>{"", "a"});
}

TEST_CASE("integer parsing is strict") {
  CHECK(to_i64("42") == 42);
  CHECK(to_i64("-7") == -7);
  CHECK(to_i64("0") == 0);
  CHECK(to_i64("9223372036854775807") == INT64_MAX);
  CHECK(!to_i64("9223372036854775808"));
  CHECK(!to_i64(""));
  CHECK(!to_i64("1x"));
  CHECK(!to_i64("x1"));
  CHECK(!to_i64("1.5"));

  CHECK(to_u64("0") == 0);
  CHECK(to_u64("18446744073709551615") == UINT64_MAX);
  CHECK(!to_u64("18446744073709551616"));
  CHECK(!to_u64("-1"));
  CHECK(!to_u64("12a"));
}

TEST_CASE("double parsing is strict") {
  CHECK(to_double("3.5") == 3.5);
  CHECK(to_double("-0.25") == -0.25);
  CHECK(to_double("1e3") == 1000.0);
  CHECK(!to_double(""));
  CHECK(!to_double("1,5"));
  CHECK(!to_double("12 "));
}

TEST_CASE("format_double") {
  CHECK(format_double(3.14159, 2) == "3.14");
  CHECK(format_double(-1.0, 0) == "-1");
  CHECK(format_double(52.52, 7) == "52.5200000");
}

TEST_CASE("kv_get on semicolon lists") {
  CHECK(kv_get("mode=all;window_ms=none;region=none", "window_ms") == "none");
  CHECK(kv_get("mode=all;window_ms=none", "mode") == "all");
  CHECK(!kv_get("mode=all", "window_ms").has_value());
  CHECK(kv_get("a=;b=1", "a") == "");
  CHECK(kv_get("x=1;x=2", "x") == "1");  // first key wins
  CHECK(!kv_get("", "a").has_value());
}

TEST_CASE("starts_with") {
  CHECK(starts_with("abc/def", "abc"));
  CHECK(starts_with("abc", "abc"));
  CHECK(!starts_with("ab", "abc"));
  CHECK(starts_with("abc", ""));
}
