#pragma once

#include <string_view>
#include <vector>

namespace edm::bus {

inline constexpr size_t kMaxTopicBytes = 256;

// Topic names: non-empty '/'-joined segments, no empty segment, no '+'/'#'.
// Filters additionally allow '+' as a whole segment and '#' as the final
// segment. '#' matches one or more remaining segments, '+' exactly one.
bool valid_topic(std::string_view topic);
bool valid_filter(std::string_view filter);
bool topic_matches(std::string_view filter, std::string_view topic);

std::vector<std::string_view> topic_segments(std::string_view s);

}  // namespace edm::bus
