#include "edm/fcd.hpp"

#include <cctype>
#include <cmath>
#include <unordered_set>

#include "edm/strings.hpp"

namespace edm::fcd {

namespace {

[[noreturn]] void syntax(const std::string& what) { throw FcdError(FcdErrc::xml_syntax, what); }

std::string decode_entities(std::string_view s) {
  if (s.find('&') == std::string_view::npos) return std::string(s);
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size();) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    size_t end = s.find(';', i);
    if (end == std::string_view::npos) syntax("unterminated entity");
    std::string_view ent = s.substr(i + 1, end - i - 1);
    if (ent == "amp") out.push_back('&');
    else if (ent == "lt") out.push_back('<');
    else if (ent == "gt") out.push_back('>');
    else if (ent == "quot") out.push_back('"');
    else if (ent == "apos") out.push_back('\'');
    else syntax("unknown entity");
    i = end + 1;
  }
  return out;
}

bool name_char(int c) {
  return std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == ':';
}

}  // namespace

FcdReader::FcdReader(std::istream& in) : in_(in) {}

// Minimal XML subset: tags, attributes, comments and declarations. Enough for
// SUMO fcd-export files; anything else is rejected as a syntax error.
std::optional<FcdReader::Tag> FcdReader::next_tag() {
  while (true) {
    int c = in_.get();
    if (c == EOF) return std::nullopt;
    if (c != '<') {
      if (!std::isspace(c)) syntax("unexpected character outside tags");
      continue;
    }
    c = in_.peek();
    if (c == '?' || c == '!') {
      // Declaration, comment or doctype: skip to the closing '>'.
      bool comment = false;
      in_.get();
      if (c == '!' && in_.peek() == '-') comment = true;
      int prev1 = 0, prev2 = 0;
      while (true) {
        int d = in_.get();
        if (d == EOF) syntax("unterminated declaration");
        if (d == '>' && (!comment || (prev1 == '-' && prev2 == '-'))) break;
        prev2 = prev1;
        prev1 = d;
      }
      continue;
    }

    Tag tag;
    if (c == '/') {
      in_.get();
      tag.closing = true;
    }
    while (name_char(in_.peek())) tag.name.push_back(static_cast<char>(in_.get()));
    if (tag.name.empty()) syntax("empty tag name");

    while (true) {
      c = in_.get();
      if (c == EOF) syntax("unterminated tag");
      if (std::isspace(c)) continue;
      if (c == '/') {
        if (in_.get() != '>') syntax("malformed self-closing tag");
        tag.self_closing = true;
        return tag;
      }
      if (c == '>') return tag;
      if (tag.closing) syntax("attributes on closing tag");

      std::string key(1, static_cast<char>(c));
      while (name_char(in_.peek())) key.push_back(static_cast<char>(in_.get()));
      while (std::isspace(in_.peek())) in_.get();
      if (in_.get() != '=') syntax("attribute without value");
      while (std::isspace(in_.peek())) in_.get();
      int quote = in_.get();
      if (quote != '"' && quote != '\'') syntax("unquoted attribute value");
      std::string value;
      while (true) {
        int d = in_.get();
        if (d == EOF) syntax("unterminated attribute value");
        if (d == quote) break;
        value.push_back(static_cast<char>(d));
      }
      tag.attrs.emplace_back(std::move(key), decode_entities(value));
    }
  }
}

void FcdReader::skip_element(const std::string& name) {
  int depth = 1;
  while (depth > 0) {
    auto tag = next_tag();
    if (!tag) syntax("unexpected end of file inside <" + name + ">");
    if (tag->closing) --depth;
    else if (!tag->self_closing) ++depth;
  }
}

FcdTimestep FcdReader::read_timestep(const Tag& open) {
  FcdTimestep step;
  const std::string* time = nullptr;
  for (const auto& [k, v] : open.attrs) {
    if (k == "time") time = &v;
  }
  if (!time) throw FcdError(FcdErrc::missing_attribute, "timestep missing attribute 'time'");
  auto t = strings::to_double(*time);
  if (!t || !std::isfinite(*t)) syntax("bad timestep time");
  step.time_s = *t;

  if (have_prev_time_ && step.time_s <= prev_time_) {
    throw FcdError(FcdErrc::non_monotonic_time, "timestep times must be strictly increasing");
  }
  have_prev_time_ = true;
  prev_time_ = step.time_s;

  std::unordered_set<std::string> seen;
  if (open.self_closing) return step;
  while (true) {
    auto tag = next_tag();
    if (!tag) syntax("unterminated <timestep>");
    if (tag->closing) {
      if (tag->name != "timestep") syntax("mismatched closing tag");
      return step;
    }
    if (tag->name != "vehicle") {
      // Tolerate other SUMO output elements (e.g. persons).
      if (!tag->self_closing) skip_element(tag->name);
      continue;
    }

    FcdVehicle v;
    const std::string* id = nullptr;
    const std::string* x = nullptr;
    const std::string* y = nullptr;
    const std::string* angle = nullptr;
    const std::string* speed = nullptr;
    for (const auto& [k, val] : tag->attrs) {
      if (k == "id") id = &val;
      else if (k == "x") x = &val;
      else if (k == "y") y = &val;
      else if (k == "angle") angle = &val;
      else if (k == "speed") speed = &val;
    }
    auto need = [](const std::string* p, const char* name) -> const std::string& {
      if (!p) throw FcdError(FcdErrc::missing_attribute, std::string("vehicle missing attribute '") + name + "'");
      return *p;
    };
    v.name = need(id, "id");
    auto xv = strings::to_double(need(x, "x"));
    auto yv = strings::to_double(need(y, "y"));
    auto av = strings::to_double(need(angle, "angle"));
    auto sv = strings::to_double(need(speed, "speed"));
    if (!xv || !yv || !av || !sv) syntax("non-numeric vehicle attribute");
    if (std::abs(*xv) > 180.0 || std::abs(*yv) > 90.0) {
      throw FcdError(FcdErrc::not_geo_coordinates,
                     "vehicle x/y outside geographic ranges; expected --fcd-output.geo export");
    }
    v.lon = *xv;
    v.lat = *yv;
    v.heading_deg = std::fmod(std::fmod(*av, 360.0) + 360.0, 360.0);
    v.speed_mps = *sv;
    if (!seen.insert(v.name).second) {
      throw FcdError(FcdErrc::duplicate_vehicle, "duplicate vehicle '" + v.name + "' in one timestep");
    }
    if (!tag->self_closing) skip_element(tag->name);
    step.vehicles.push_back(std::move(v));
  }
}

std::optional<FcdTimestep> FcdReader::next() {
  if (done_) return std::nullopt;
  while (true) {
    auto tag = next_tag();
    if (!tag) {
      if (!root_seen_) syntax("missing fcd-export root");
      syntax("unterminated fcd-export");
    }
    if (!root_seen_) {
      if (tag->closing || tag->name != "fcd-export") syntax("expected <fcd-export> root");
      root_seen_ = true;
      if (tag->self_closing) {
        done_ = true;
        return std::nullopt;
      }
      continue;
    }
    if (tag->closing) {
      if (tag->name != "fcd-export") syntax("mismatched closing tag");
      done_ = true;
      return std::nullopt;
    }
    if (tag->name == "timestep") return read_timestep(*tag);
    if (!tag->self_closing) skip_element(tag->name);
  }
}

std::vector<FcdTimestep> parse_fcd(std::istream& in) {
  FcdReader reader(in);
  std::vector<FcdTimestep> out;
  while (auto step = reader.next()) out.push_back(std::move(*step));
  return out;
}

}  // namespace edm::fcd
