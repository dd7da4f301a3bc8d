#include "edm/geo.hpp"

#include <cmath>

namespace edm::geo {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegToRad = kPi / 180.0;
}  // namespace

double normalize_lon(double lon_deg) {
  double l = std::fmod(lon_deg + 180.0, 360.0);
  if (l < 0) l += 360.0;
  return l - 180.0;
}

bool valid_point(const GeoPoint& p) {
  return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 && p.lat <= 90.0;
}

double haversine_m(const GeoPoint& a, const GeoPoint& b) {
  double phi1 = a.lat * kDegToRad;
  double phi2 = b.lat * kDegToRad;
  double dphi = (b.lat - a.lat) * kDegToRad;
  double dlam = normalize_lon(b.lon - a.lon) * kDegToRad;
  double s = std::sin(dphi / 2);
  double t = std::sin(dlam / 2);
  double h = s * s + std::cos(phi1) * std::cos(phi2) * t * t;
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

LocalProjection::LocalProjection(const GeoPoint& origin) : origin_(origin) {
  if (!valid_point(origin) || std::abs(origin.lat) >= kMaxProjectionLatDeg) {
    throw OutOfProjectionDomain("projection origin latitude out of range");
  }
  origin_.lon = normalize_lon(origin_.lon);
  m_per_deg_lat_ = kEarthRadiusM * kDegToRad;
  m_per_deg_lon_ = m_per_deg_lat_ * std::cos(origin_.lat * kDegToRad);
}

LocalProjection::Xy LocalProjection::project(const GeoPoint& p) const {
  if (!valid_point(p) || std::abs(p.lat) >= kMaxProjectionLatDeg) {
    throw OutOfProjectionDomain("latitude outside projection domain");
  }
  return {normalize_lon(p.lon - origin_.lon) * m_per_deg_lon_, (p.lat - origin_.lat) * m_per_deg_lat_};
}

GeoPoint LocalProjection::unproject(double x, double y) const {
  GeoPoint p{origin_.lat + y / m_per_deg_lat_, normalize_lon(origin_.lon + x / m_per_deg_lon_)};
  if (std::abs(p.lat) >= kMaxProjectionLatDeg) {
    throw OutOfProjectionDomain("unprojected latitude outside projection domain");
  }
  return p;
}

GeoPoint offset_en(const GeoPoint& base, double east_m, double north_m, const GeoPoint& origin) {
  LocalProjection proj(origin);
  auto xy = proj.project(base);
  return proj.unproject(xy.x + east_m, xy.y + north_m);
}

}  // namespace edm::geo
