#include "edm/hexgrid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include "doctest.h"

using namespace edm::geo;

namespace {

const GeoPoint kOrigin{52.0, 13.0};

HexGrid make_grid() { return HexGrid(HexGridConfig{kOrigin, 15000.0}); }

// Deterministic uniform doubles in [0, 1), independent of <random> distributions.
struct Rng {
  uint64_t s;
  explicit Rng(uint64_t seed) : s(seed) {}
  uint64_t bits() {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    uint64_t x = s;
    x ^= x >> 33;
    x *= 0xff51afd7ed558ccdull;
    x ^= x >> 29;
    return x;
  }
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }
  double range(double lo, double hi) { return lo + (hi - lo) * uniform(); }
};

// Crossing-number point-in-polygon, the containment oracle.
bool point_in_poly(const std::array<LocalProjection::Xy, 6>& poly, double px, double py) {
  bool in = false;
  for (int i = 0, j = 5; i < 6; j = i++) {
    if ((poly[i].y > py) != (poly[j].y > py)) {
      double t = (py - poly[i].y) / (poly[j].y - poly[i].y);
      if (px < poly[i].x + t * (poly[j].x - poly[i].x)) in = !in;
    }
  }
  return in;
}

std::array<LocalProjection::Xy, 6> polygon_xy(const HexGrid& g, const CellId& c) {
  std::array<LocalProjection::Xy, 6> out;
  auto poly = g.cell_polygon(c);
  for (int i = 0; i < 6; ++i) out[i] = g.projection().project(poly[i]);
  return out;
}

double dist_xy(const LocalProjection::Xy& a, const LocalProjection::Xy& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

TEST_CASE("derived hexagon sizes for the 15000 m2 cell") {
  HexGridConfig cfg{kOrigin, 15000.0};
  CHECK(cfg.edge_m() == doctest::Approx(75.98356857).epsilon(1e-9));
  CHECK(cfg.apothem_m() == doctest::Approx(65.80370065).epsilon(1e-9));
  CHECK(cfg.spacing_m() == doctest::Approx(131.60740130).epsilon(1e-9));
  // Opposite edges are 2*apothem apart; the deployment constraint is <= 135 m.
  CHECK(2.0 * cfg.apothem_m() == doctest::Approx(131.60740130).epsilon(1e-9));
  CHECK(2.0 * cfg.apothem_m() <= 135.0);
  CHECK_THROWS_AS(HexGridConfig({kOrigin, 0.0}).edge_m(), std::invalid_argument);
}

TEST_CASE("cell polygon area equals the configured cell area") {
  HexGrid g = make_grid();
  for (CellId c : {CellId{0, 0}, CellId{4, -7}, CellId{-12, 3}}) {
    auto poly = polygon_xy(g, c);
    double area2 = 0.0;
    for (int i = 0, j = 5; i < 6; j = i++) {
      area2 += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
    }
    CHECK(std::abs(area2) / 2.0 == doctest::Approx(15000.0).epsilon(1e-6));
  }
}

TEST_CASE("cell id encoding goldens") {
  CHECK(CellId{0, 0}.encode() == "h0_0");
  CHECK(CellId{3, -2}.encode() == "h3_-2");
  CHECK(CellId{35, 36}.encode() == "hz_10");
  CHECK(CellId{-71, 71}.encode() == "h-1z_1z");
  CHECK(CellId{1, 105}.encode() == "h1_2x");
  CHECK(CellId{INT32_MAX, INT32_MIN}.encode() == "hzik0zj_-zik0zk");

  CHECK(CellId::parse("h0_0") == CellId{0, 0});
  CHECK(CellId::parse("h3_-2") == CellId{3, -2});
  CHECK(CellId::parse("hz_10") == CellId{35, 36});
  CHECK(CellId::parse("h-1z_1z") == CellId{-71, 71});
  CHECK(CellId::parse("hzik0zj_-zik0zk") == CellId{INT32_MAX, INT32_MIN});
}

TEST_CASE("cell id parsing rejects non-canonical forms") {
  for (const char* bad : {"", "h", "h1", "h1_", "h_1", "x1_2", "H1_2", "h01_2", "h1_02", "h-0_1",
                          "h1_-0", "h1_2_3", "h1 _2", "h+1_2", "hA_2", "h1_2/", "h-_1",
                          "hzzzzzzz_1", "h1_zzzzzzz", "h--1_2", "hzik0zk_1"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(CellId::parse(bad), BadCellId);
  }
}

TEST_CASE("cell id encode/parse round trip") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    CellId c{static_cast<int32_t>(rng.bits()), static_cast<int32_t>(rng.bits())};
    std::string e = c.encode();
    CHECK(CellId::parse(e) == c);
    CHECK(e.find('/') == std::string::npos);
    CHECK(e.find('+') == std::string::npos);
    CHECK(e.find('#') == std::string::npos);
  }
}

TEST_CASE("cell_of picks the nearest cell center") {
  HexGrid g = make_grid();
  Rng rng(11);
  for (int i = 0; i < 3000; ++i) {
    GeoPoint origin = kOrigin;
    double x = rng.range(-2500.0, 2500.0);
    double y = rng.range(-2500.0, 2500.0);
    GeoPoint p = offset_en(origin, x, y, origin);
    CellId c = g.cell_of(p);

    auto pxy = g.projection().project(p);
    double dc = dist_xy(pxy, g.projection().project(g.cell_center(c)));
    // Voronoi property of a hex grid: containment implies nearest center.
    double best = dc;
    for (const CellId& n : HexGrid::neighbors(c)) {
      for (const CellId& n2 : HexGrid::neighbors(n)) {
        double d = dist_xy(pxy, g.projection().project(g.cell_center(n2)));
        best = std::min(best, d);
      }
    }
    CHECK(dc <= best + 1e-6);
    CHECK(dc <= g.config().edge_m() + 1e-6);
  }
}

TEST_CASE("cell_of agrees with the polygon containment oracle") {
  HexGrid g = make_grid();
  Rng rng(13);
  int checked = 0;
  for (int i = 0; i < 3000; ++i) {
    GeoPoint p = offset_en(kOrigin, rng.range(-1500, 1500), rng.range(-1500, 1500), kOrigin);
    CellId c = g.cell_of(p);
    auto pxy = g.projection().project(p);
    // Skip points too close to a boundary for the oracle to be meaningful.
    if (!g.contains(c, pxy, -1e-3)) continue;
    CHECK(point_in_poly(polygon_xy(g, c), pxy.x, pxy.y));
    ++checked;
  }
  CHECK(checked > 2500);
}

TEST_CASE("10k points in a 2 km disc land in a containing cell") {
  HexGrid g = make_grid();
  Rng rng(19);
  for (int i = 0; i < 10000; ++i) {
    // Rejection-sample the disc.
    double x, y;
    do {
      x = rng.range(-2000.0, 2000.0);
      y = rng.range(-2000.0, 2000.0);
    } while (x * x + y * y > 2000.0 * 2000.0);
    GeoPoint p = offset_en(kOrigin, x, y, kOrigin);
    CellId c = g.cell_of(p);
    auto pxy = g.projection().project(p);
    // Closed-hexagon membership with a hair of slack for the projection noise.
    CHECK(g.contains(c, pxy, 1e-9 * g.config().edge_m()));
  }
}

TEST_CASE("cell_of inverts cell_center") {
  HexGrid g = make_grid();
  Rng rng(29);
  for (int i = 0; i < 1000; ++i) {
    // Cells within roughly 50 km of the origin.
    auto coord = [&] { return static_cast<int32_t>(rng.range(-380.0, 380.0)); };
    CellId c{coord(), coord()};
    CHECK(g.cell_of(g.cell_center(c)) == c);
  }
}

TEST_CASE("contains matches the polygon oracle away from boundaries") {
  HexGrid g = make_grid();
  Rng rng(17);
  CellId c{2, -1};
  auto poly = polygon_xy(g, c);
  for (int i = 0; i < 2000; ++i) {
    LocalProjection::Xy p{rng.range(-300, 600), rng.range(-400, 300)};
    bool inside = g.contains(c, p, -1e-3);
    bool outside = !g.contains(c, p, 1e-3);
    if (inside) CHECK(point_in_poly(poly, p.x, p.y));
    if (outside) CHECK(!point_in_poly(poly, p.x, p.y));
  }
}

TEST_CASE("boundary points break ties toward the smaller encoding") {
  HexGrid g = make_grid();
  const LocalProjection& proj = g.projection();
  double s = g.config().spacing_m();
  double e = g.config().edge_m();

  auto cell_at_xy = [&](double x, double y) { return g.cell_of(proj.unproject(x, y)); };

  // Edge midpoint between (0,0) and (1,0): both contain it, "h0_0" < "h1_0".
  CHECK(cell_at_xy(s / 2.0, 0.0) == CellId{0, 0});
  // Between (0,0) and (-1,0): "h-1_0" < "h0_0" ('-' sorts before digits).
  CHECK(cell_at_xy(-s / 2.0, 0.0) == CellId{-1, 0});
  // Between (0,0) and (0,1) the shared edge midpoint: "h0_0" < "h0_1".
  CHECK(cell_at_xy(s / 4.0, 0.75 * e) == CellId{0, 0});
  // Corner shared by (0,0), (0,1) and (1,0).
  CHECK(cell_at_xy(e * std::sqrt(3.0) / 2.0, e / 2.0) == CellId{0, 0});
  // Corner shared by (-1,-1), (-1,0) and (0,-1); "h-1_-1" is the smallest.
  auto base = g.projection().project(g.cell_center({-1, -1}));
  CHECK(cell_at_xy(base.x + e * std::sqrt(3.0) / 2.0, base.y + e / 2.0) == CellId{-1, -1});
}

TEST_CASE("cell centers and polygons have the expected metric layout") {
  HexGrid g = make_grid();
  CHECK(haversine_m(g.cell_center({0, 0}), kOrigin) < 1e-6);

  auto c00 = g.projection().project(g.cell_center({0, 0}));
  for (const CellId& n : HexGrid::neighbors({0, 0})) {
    auto cn = g.projection().project(g.cell_center(n));
    CHECK(dist_xy(c00, cn) == doctest::Approx(g.config().spacing_m()).epsilon(1e-9));
  }

  auto poly = polygon_xy(g, {5, -3});
  auto ctr = g.projection().project(g.cell_center({5, -3}));
  for (const auto& corner : poly) {
    CHECK(dist_xy(ctr, corner) == doctest::Approx(g.config().edge_m()).epsilon(1e-9));
  }
}

TEST_CASE("neighbors are the six adjacent cells") {
  auto n = HexGrid::neighbors({2, -1});
  std::set<std::pair<int32_t, int32_t>> got;
  for (const CellId& c : n) got.insert({c.q, c.r});
  std::set<std::pair<int32_t, int32_t>> want{{3, -1}, {1, -1}, {2, 0}, {2, -2}, {3, -2}, {1, 0}};
  CHECK(got == want);
}

TEST_CASE("cells_in_disc frozen counts at a cell center") {
  HexGrid g = make_grid();
  GeoPoint center = g.cell_center({0, 0});
  // Shell radii (meters): 0, 131.6, 227.9, 263.2, 348.2, ... none within 2 m
  // of the probe radii below, so the counts are numerically stable.
  CHECK(g.cells_in_disc(center, 0.0).size() == 1);
  CHECK(g.cells_in_disc(center, 130.0).size() == 1);
  CHECK(g.cells_in_disc(center, 133.0).size() == 7);
  CHECK(g.cells_in_disc(center, 300.0).size() == 19);
  CHECK(g.cells_in_disc(center, 500.0).size() == 55);
}

TEST_CASE("cells_in_disc matches a brute-force scan") {
  HexGrid g = make_grid();
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    GeoPoint center = offset_en(kOrigin, rng.range(-800, 800), rng.range(-800, 800), kOrigin);
    double radius = rng.range(0.0, 700.0);
    auto got = g.cells_in_disc(center, radius);

    CHECK(std::is_sorted(got.begin(), got.end()));
    CHECK(std::adjacent_find(got.begin(), got.end()) == got.end());

    // Oracle: scan a generous window around the center cell.
    CellId c0 = g.cell_of(center);
    std::vector<CellId> want;
    int k = 10;
    for (int dq = -k; dq <= k; ++dq) {
      for (int dr = -k; dr <= k; ++dr) {
        CellId c{c0.q + dq, c0.r + dr};
        if (haversine_m(g.cell_center(c), center) <= radius) want.push_back(c);
      }
    }
    std::sort(want.begin(), want.end());
    CHECK(got == want);
  }
}

TEST_CASE("cells_in_disc is complete far from the projection origin") {
  // An equatorial origin with a disc at 52N: planar east-west distances are
  // stretched by cos(0)/cos(52) ~ 1.62, which an enumeration bound computed
  // from ground distance alone would miss.
  HexGrid g(HexGridConfig{{0.0, 0.0}, 15000.0});
  GeoPoint center{52.0, 0.0};
  double radius = 1200.0;
  auto got = g.cells_in_disc(center, radius);

  CellId c0 = g.cell_of(center);
  std::vector<CellId> want;
  int k = 40;
  for (int dq = -k; dq <= k; ++dq) {
    for (int dr = -k; dr <= k; ++dr) {
      CellId c{c0.q + dq, c0.r + dr};
      if (haversine_m(g.cell_center(c), center) <= radius) want.push_back(c);
    }
  }
  std::sort(want.begin(), want.end());
  CHECK(got == want);
  for (const CellId& c : got) CHECK(haversine_m(g.cell_center(c), center) <= radius);
}

TEST_CASE("cells_in_disc is superset-monotone in the radius") {
  HexGrid g = make_grid();
  GeoPoint center = offset_en(kOrigin, 37.0, -19.0, kOrigin);
  auto small = g.cells_in_disc(center, 400.0);
  auto big = g.cells_in_disc(center, 500.0);
  CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
}

TEST_CASE("grid assignment is reproducible across instances") {
  HexGrid a = make_grid();
  HexGrid b = make_grid();
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    GeoPoint p = offset_en(kOrigin, rng.range(-2000, 2000), rng.range(-2000, 2000), kOrigin);
    CHECK(a.cell_of(p) == b.cell_of(p));
  }
}

TEST_CASE("points outside the latitude band are rejected") {
  HexGrid g = make_grid();
  CHECK_THROWS_AS(g.cell_of({85.5, 0.0}), OutOfProjectionDomain);
  CHECK_THROWS_AS(g.cell_of({-90.0, 0.0}), OutOfProjectionDomain);
}
