#pragma once

#include <stdexcept>

namespace edm::geo {

inline constexpr double kEarthRadiusM = 6371000.0;
// Equirectangular projection breaks down toward the poles; indexing is
// limited to this latitude band.
inline constexpr double kMaxProjectionLatDeg = 85.0;

struct GeoPoint {
  double lat = 0.0;  // degrees WGS-84, [-90, 90]
  double lon = 0.0;  // degrees WGS-84, normalized to [-180, 180)

  bool operator==(const GeoPoint&) const = default;
};

struct OutOfProjectionDomain : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double normalize_lon(double lon_deg);
bool valid_point(const GeoPoint& p);
double haversine_m(const GeoPoint& a, const GeoPoint& b);

// Local tangent plane about `origin`: x east, y north, meters. Longitude is
// scaled by cos(origin latitude), so it is metrically faithful only within a
// few tens of km of the origin, which covers one MEC region.
class LocalProjection {
 public:
  explicit LocalProjection(const GeoPoint& origin);

  struct Xy {
    double x = 0.0;
    double y = 0.0;
  };

  Xy project(const GeoPoint& p) const;         // throws OutOfProjectionDomain
  GeoPoint unproject(double x, double y) const;  // throws OutOfProjectionDomain

  const GeoPoint& origin() const { return origin_; }

 private:
  GeoPoint origin_;
  double m_per_deg_lat_;
  double m_per_deg_lon_;
};

// Convenience for tests and trajectory generation: move a point by meters
// east/north in the projection around `origin`.
GeoPoint offset_en(const GeoPoint& base, double east_m, double north_m, const GeoPoint& origin);

}  // namespace edm::geo
