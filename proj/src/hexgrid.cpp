#include "edm/hexgrid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace edm::geo {

namespace {

constexpr double kSqrt3 = 1.7320508075688772;
constexpr double kPi = 3.14159265358979323846;
constexpr const char* kB36Digits = "0123456789abcdefghijklmnopqrstuvwxyz";

void append_b36(std::string& out, int32_t v) {
  // '-' is not a base-36 digit, so the sign cannot be confused with a
  // coordinate digit ('m' and 'n' are digits 22 and 23).
  uint32_t u;
  if (v < 0) {
    out.push_back('-');
    u = ~static_cast<uint32_t>(v) + 1u;
  } else {
    u = static_cast<uint32_t>(v);
  }
  char buf[16];
  int n = 0;
  do {
    buf[n++] = kB36Digits[u % 36];
    u /= 36;
  } while (u != 0);
  while (n > 0) out.push_back(buf[--n]);
}

int32_t parse_b36(std::string_view tok) {
  bool neg = false;
  if (!tok.empty() && tok.front() == '-') {
    neg = true;
    tok.remove_prefix(1);
  }
  if (tok.empty()) throw BadCellId("empty coordinate");
  if (tok.size() > 1 && tok.front() == '0') throw BadCellId("leading zero");
  const int64_t limit = neg ? -static_cast<int64_t>(INT32_MIN) : INT32_MAX;
  int64_t v = 0;
  for (char c : tok) {
    int d;
    if (c >= '0' && c <= '9') d = c - '0';
    else if (c >= 'a' && c <= 'z') d = c - 'a' + 10;
    else throw BadCellId("bad digit");
    v = v * 36 + d;
    if (v > limit) throw BadCellId("coordinate overflow");
  }
  if (neg && v == 0) throw BadCellId("negative zero");
  return static_cast<int32_t>(neg ? -v : v);
}

}  // namespace

std::string CellId::encode() const {
  std::string out;
  out.reserve(12);
  out.push_back('h');
  append_b36(out, q);
  out.push_back('_');
  append_b36(out, r);
  return out;
}

CellId CellId::parse(std::string_view s) {
  if (s.size() < 4 || s.front() != 'h') throw BadCellId("missing prefix");
  s.remove_prefix(1);
  size_t sep = s.find('_');
  if (sep == std::string_view::npos) throw BadCellId("missing separator");
  return {parse_b36(s.substr(0, sep)), parse_b36(s.substr(sep + 1))};
}

double HexGridConfig::edge_m() const {
  if (!(cell_area_m2 > 0.0)) throw std::invalid_argument("cell_area_m2 must be positive");
  return std::sqrt(2.0 * cell_area_m2 / (3.0 * kSqrt3));
}

double HexGridConfig::apothem_m() const { return edge_m() * kSqrt3 / 2.0; }

double HexGridConfig::spacing_m() const { return edge_m() * kSqrt3; }

HexGrid::HexGrid(const HexGridConfig& cfg) : cfg_(cfg), proj_(cfg.origin), edge_(cfg.edge_m()) {}

LocalProjection::Xy HexGrid::center_xy(const CellId& c) const {
  return {edge_ * kSqrt3 * (c.q + c.r / 2.0), edge_ * 1.5 * c.r};
}

bool HexGrid::contains(const CellId& c, const LocalProjection::Xy& p, double slack_m) const {
  auto ctr = center_xy(c);
  double dx = p.x - ctr.x;
  double dy = p.y - ctr.y;
  double a = edge_ * kSqrt3 / 2.0 + slack_m;
  // Pointy-top hexagon: edge normals at 0, 60 and 120 degrees.
  return std::abs(dx) <= a && std::abs(0.5 * dx + kSqrt3 / 2.0 * dy) <= a &&
         std::abs(-0.5 * dx + kSqrt3 / 2.0 * dy) <= a;
}

CellId HexGrid::cell_of(const GeoPoint& p) const {
  auto xy = proj_.project(p);
  double qf = (kSqrt3 / 3.0 * xy.x - xy.y / 3.0) / edge_;
  double rf = (2.0 / 3.0 * xy.y) / edge_;

  // Cube rounding.
  double xf = qf, zf = rf, yf = -xf - zf;
  double rx = std::round(xf), ry = std::round(yf), rz = std::round(zf);
  double ddx = std::abs(rx - xf), ddy = std::abs(ry - yf), ddz = std::abs(rz - zf);
  if (ddx > ddy && ddx > ddz) rx = -ry - rz;
  else if (ddy <= ddz) rz = -rx - ry;
  CellId c0{static_cast<int32_t>(rx), static_cast<int32_t>(rz)};

  double tiny = edge_ * 1e-9;
  if (contains(c0, xy, -tiny)) return c0;  // strictly interior, no tie possible

  // On or numerically near a boundary: deterministic tie-break toward the
  // lexicographically smaller encoding among the containing candidates.
  CellId best = c0;
  std::string best_key;
  bool found = false;
  auto consider = [&](const CellId& cand) {
    if (!contains(cand, xy, tiny)) return;
    std::string key = cand.encode();
    if (!found || key < best_key) {
      best = cand;
      best_key = std::move(key);
      found = true;
    }
  };
  consider(c0);
  for (const CellId& n : neighbors(c0)) consider(n);
  return best;
}

std::array<CellId, 6> HexGrid::neighbors(const CellId& c) {
  return {CellId{c.q + 1, c.r}, CellId{c.q - 1, c.r}, CellId{c.q, c.r + 1},
          CellId{c.q, c.r - 1}, CellId{c.q + 1, c.r - 1}, CellId{c.q - 1, c.r + 1}};
}

GeoPoint HexGrid::cell_center(const CellId& c) const {
  auto xy = center_xy(c);
  return proj_.unproject(xy.x, xy.y);
}

std::array<GeoPoint, 6> HexGrid::cell_polygon(const CellId& c) const {
  auto ctr = center_xy(c);
  std::array<GeoPoint, 6> out;
  for (int i = 0; i < 6; ++i) {
    double ang = (60.0 * i + 30.0) * kPi / 180.0;
    out[i] = proj_.unproject(ctr.x + edge_ * std::cos(ang), ctr.y + edge_ * std::sin(ang));
  }
  return out;
}

std::vector<CellId> HexGrid::cells_in_disc(const GeoPoint& center, double radius_m) const {
  if (radius_m < 0.0) throw std::invalid_argument("radius_m must be >= 0");
  CellId c0 = cell_of(center);
  // The projection stretches east-west ground distance by cos(origin.lat) /
  // cos(point.lat); bound the enumeration radius by the worst stretch over
  // the disc's latitude band so no qualifying center is skipped.
  double lat_span_deg = radius_m / kEarthRadiusM * (180.0 / kPi);
  double max_abs_lat =
      std::min(kMaxProjectionLatDeg,
               std::max(std::abs(center.lat - lat_span_deg), std::abs(center.lat + lat_span_deg)));
  double stretch =
      std::cos(cfg_.origin.lat * kPi / 180.0) / std::cos(max_abs_lat * kPi / 180.0);
  stretch = std::max(stretch, 1.0);
  // Hex distance k can be as little as k*spacing*sqrt(3)/2 in the plane.
  int k = static_cast<int>(std::ceil(radius_m * stretch / (cfg_.spacing_m() * kSqrt3 / 2.0))) + 1;
  std::vector<CellId> out;
  for (int dq = -k; dq <= k; ++dq) {
    int lo = std::max(-k, -dq - k);
    int hi = std::min(k, -dq + k);
    for (int dr = lo; dr <= hi; ++dr) {
      CellId cand{c0.q + dq, c0.r + dr};
      GeoPoint cc;
      try {
        cc = cell_center(cand);
      } catch (const OutOfProjectionDomain&) {
        continue;
      }
      if (haversine_m(cc, center) <= radius_m) out.push_back(cand);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace edm::geo
