#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "edm/geo.hpp"

namespace edm {

// One MEC server as the registry sees it. Serialized as the CSV line
//   mec_id,lat,lon,r_opt,r_oper,endpoint
// used both in registry login payloads and in neighbour-list publications.
struct MecDescriptor {
  std::string mec_id;
  geo::GeoPoint pos;
  double r_opt_m = 0.0;
  double r_oper_m = 0.0;
  std::string endpoint;  // host:port of the MEC's broker

  bool operator==(const MecDescriptor&) const = default;

  std::string to_line() const;
  static std::optional<MecDescriptor> parse_line(std::string_view line);
};

}  // namespace edm
