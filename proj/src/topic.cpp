#include "edm/topic.hpp"

#include "edm/strings.hpp"

namespace edm::bus {

std::vector<std::string_view> topic_segments(std::string_view s) {
  return strings::split(s, '/');
}

namespace {
bool plain_segment(std::string_view seg) {
  if (seg.empty()) return false;
  return seg.find_first_of("/+#") == std::string_view::npos;
}
}  // namespace

bool valid_topic(std::string_view topic) {
  if (topic.empty() || topic.size() > kMaxTopicBytes) return false;
  for (auto seg : topic_segments(topic)) {
    if (!plain_segment(seg)) return false;
  }
  return true;
}

bool valid_filter(std::string_view filter) {
  if (filter.empty() || filter.size() > kMaxTopicBytes) return false;
  auto segs = topic_segments(filter);
  for (size_t i = 0; i < segs.size(); ++i) {
    auto seg = segs[i];
    if (seg == "+") continue;
    if (seg == "#") {
      if (i + 1 != segs.size()) return false;
      continue;
    }
    if (!plain_segment(seg)) return false;
  }
  return true;
}

bool topic_matches(std::string_view filter, std::string_view topic) {
  size_t fpos = 0, tpos = 0;
  while (true) {
    size_t fend = filter.find('/', fpos);
    std::string_view fseg = filter.substr(fpos, fend == std::string_view::npos ? fend : fend - fpos);
    size_t tend = topic.find('/', tpos);
    std::string_view tseg = topic.substr(tpos, tend == std::string_view::npos ? tend : tend - tpos);

    if (fseg == "#") return !tseg.empty() || tend != std::string_view::npos;
    if (fseg != "+" && fseg != tseg) return false;

    bool flast = fend == std::string_view::npos;
    bool tlast = tend == std::string_view::npos;
    if (flast || tlast) return flast && tlast;
    fpos = fend + 1;
    tpos = tend + 1;
  }
}

}  // namespace edm::bus
