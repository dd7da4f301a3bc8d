#include "edm/descriptor.hpp"

#include <cmath>

#include "edm/strings.hpp"
#include "edm/topic.hpp"

namespace edm {

std::string MecDescriptor::to_line() const {
  std::string out = mec_id;
  out += ',';
  out += strings::format_double(pos.lat, 7);
  out += ',';
  out += strings::format_double(pos.lon, 7);
  out += ',';
  out += strings::format_double(r_opt_m, 1);
  out += ',';
  out += strings::format_double(r_oper_m, 1);
  out += ',';
  out += endpoint;
  return out;
}

std::optional<MecDescriptor> MecDescriptor::parse_line(std::string_view line) {
  auto f = strings::split(line, ',');
  if (f.size() != 6) return std::nullopt;
  // The id is embedded in topic names, so it must be a single valid segment.
  if (f[0].empty() || !bus::valid_topic(f[0])) return std::nullopt;
  if (f[0].find('/') != std::string_view::npos) return std::nullopt;

  auto lat = strings::to_double(f[1]);
  auto lon = strings::to_double(f[2]);
  auto r_opt = strings::to_double(f[3]);
  auto r_oper = strings::to_double(f[4]);
  if (!lat || !lon || !r_opt || !r_oper) return std::nullopt;
  if (std::abs(*lat) > 90.0 || std::abs(*lon) > 180.0) return std::nullopt;
  if (*r_opt < 0.0 || *r_oper < *r_opt) return std::nullopt;
  if (f[5].empty()) return std::nullopt;

  MecDescriptor d;
  d.mec_id = std::string(f[0]);
  d.pos = {*lat, *lon};
  d.r_opt_m = *r_opt;
  d.r_oper_m = *r_oper;
  d.endpoint = std::string(f[5]);
  return d;
}

}  // namespace edm
