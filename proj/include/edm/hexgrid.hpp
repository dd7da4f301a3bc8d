#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "edm/geo.hpp"

namespace edm::geo {

// Axial coordinate of one hexagon cell. Encoded as "h<q>_<r>" with base-36
// lowercase magnitudes and a '-' sign prefix, e.g. (3,-2) -> "h3_-2". The
// encoding never contains '/', '+' or '#', so it is safe inside topic names.
struct CellId {
  int32_t q = 0;
  int32_t r = 0;

  auto operator<=>(const CellId&) const = default;

  std::string encode() const;
  static CellId parse(std::string_view s);  // throws BadCellId on non-canonical input
};

struct BadCellId : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CellIdHash {
  size_t operator()(const CellId& c) const {
    uint64_t v = (static_cast<uint64_t>(static_cast<uint32_t>(c.q)) << 32) | static_cast<uint32_t>(c.r);
    v ^= v >> 33;
    v *= 0xff51afd7ed558ccdULL;
    v ^= v >> 33;
    return static_cast<size_t>(v);
  }
};

struct HexGridConfig {
  GeoPoint origin;               // deployment-wide projection center
  double cell_area_m2 = 15000.0;

  // Regular pointy-top hexagon derived sizes.
  double edge_m() const;     // circumradius == side length
  double apothem_m() const;  // center to edge midpoint; opposite edges are 2*apothem apart
  double spacing_m() const;  // distance between adjacent cell centers == sqrt(3)*edge
};

// Fixed-resolution pointy-top hexagonal partition of the local tangent plane.
// Pure and deterministic: identical config + point give an identical cell on
// every process, which the topic naming relies on.
class HexGrid {
 public:
  explicit HexGrid(const HexGridConfig& cfg);

  const HexGridConfig& config() const { return cfg_; }
  const LocalProjection& projection() const { return proj_; }

  // Total over the valid latitude band; boundary ties go to the candidate
  // with the lexicographically smaller encoding.
  CellId cell_of(const GeoPoint& p) const;

  static std::array<CellId, 6> neighbors(const CellId& c);

  GeoPoint cell_center(const CellId& c) const;

  // The 6 corners of the cell, counter-clockwise. For containment oracles.
  std::array<GeoPoint, 6> cell_polygon(const CellId& c) const;

  // Every cell whose center lies within radius_m (haversine) of `center`.
  // Sorted by (q, r); superset-monotone in radius_m.
  std::vector<CellId> cells_in_disc(const GeoPoint& center, double radius_m) const;

  // Closed-hexagon membership in the projected plane, half-plane form.
  bool contains(const CellId& c, const LocalProjection::Xy& p, double slack_m = 0.0) const;

 private:
  LocalProjection::Xy center_xy(const CellId& c) const;

  HexGridConfig cfg_;
  LocalProjection proj_;
  double edge_;
};

}  // namespace edm::geo
