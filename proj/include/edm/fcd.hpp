#pragma once

#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace edm::fcd {

// One vehicle sample from a SUMO --fcd-output.geo export.
struct FcdVehicle {
  std::string name;
  double lat = 0.0;
  double lon = 0.0;
  double heading_deg = 0.0;
  double speed_mps = 0.0;
};

struct FcdTimestep {
  double time_s = 0.0;
  std::vector<FcdVehicle> vehicles;
};

enum class FcdErrc { xml_syntax, missing_attribute, non_monotonic_time, not_geo_coordinates, duplicate_vehicle };

struct FcdError : std::runtime_error {
  FcdError(FcdErrc c, const std::string& what) : std::runtime_error(what), code(c) {}
  FcdErrc code;
};

// Streaming pull parser: one timestep per next() call, file order, without
// loading the whole document. Single consumer per stream.
class FcdReader {
 public:
  explicit FcdReader(std::istream& in);

  std::optional<FcdTimestep> next();  // nullopt at end of document

 private:
  struct Tag {
    std::string name;
    std::vector<std::pair<std::string, std::string>> attrs;
    bool closing = false;       // </name>
    bool self_closing = false;  // <name/>
  };

  std::optional<Tag> next_tag();
  FcdTimestep read_timestep(const Tag& open);
  void skip_element(const std::string& name);

  std::istream& in_;
  bool root_seen_ = false;
  bool done_ = false;
  bool have_prev_time_ = false;
  double prev_time_ = 0.0;
};

std::vector<FcdTimestep> parse_fcd(std::istream& in);

}  // namespace edm::fcd
