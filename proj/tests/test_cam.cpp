#include "edm/cam.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"

using namespace edm;
using namespace edm::cam;

namespace {

const geo::GeoPoint kOrigin{52.0, 13.0};

geo::HexGrid make_grid() { return geo::HexGrid(geo::HexGridConfig{kOrigin, 15000.0}); }

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
  double range(double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(bits() >> 11) * 0x1.0p-53);
  }
};

}  // namespace

TEST_CASE("station type names") {
  CHECK(to_string(StationType::car) == std::string("car"));
  CHECK(to_string(StationType::rsu) == std::string("rsu"));
  CHECK(station_type_from("bus") == StationType::bus);
  CHECK(station_type_from("motorcycle") == StationType::motorcycle);
  CHECK(!station_type_from("tram"));
  CHECK(!station_type_from(""));
}

TEST_CASE("golden frame layout") {
  CamMessage m;
  m.station_id = 0x01020304;
  m.gen_time_ms = 0x0102030405060708ull;
  m.lat = 52.52;
  m.lon = 13.405;
  m.station_type = StationType::bus;
  m.heading_deg = 90.0;
  m.speed_mps = 13.89;
  m.accel_mps2 = -1.5;

  auto frame = encode_cam(m);
  const uint8_t want[kCamFrameSize] = {
      0xca, 0x01,                                      // magic
      0x04, 0x03, 0x02, 0x01,                          // station_id LE
      0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01,  // gen_time_ms LE
      0x80, 0xea, 0x4d, 0x1f,                          // lat 525200000 LE
      0xd0, 0x70, 0xfd, 0x07,                          // lon 134050000 LE
      0x02,                                            // type bus
      0x84, 0x03,                                      // heading 900
      0x6d, 0x05,                                      // speed 1389
      0xf1, 0xff,                                      // accel -15
      0x00, 0x00, 0x00, 0x00, 0x00,                    // reserved
  };
  CHECK(std::vector<uint8_t>(frame.begin(), frame.end()) ==
        std::vector<uint8_t>(want, want + kCamFrameSize));

  auto d = decode_cam(std::span<const uint8_t>(frame), make_grid());
  CHECK(d.station_id == m.station_id);
  CHECK(d.gen_time_ms == m.gen_time_ms);
  CHECK(d.lat == doctest::Approx(52.52).epsilon(1e-12));
  CHECK(d.lon == doctest::Approx(13.405).epsilon(1e-12));
  CHECK(d.station_type == StationType::bus);
  CHECK(d.heading_deg == doctest::Approx(90.0));
  CHECK(d.speed_mps == doctest::Approx(13.89));
  CHECK(d.accel_mps2 == doctest::Approx(-1.5));
}

TEST_CASE("round trip stays within half a quantum") {
  auto grid = make_grid();
  Rng rng(41);
  for (int i = 0; i < 2000; ++i) {
    CamMessage m;
    m.station_id = static_cast<uint32_t>(rng.bits());
    m.gen_time_ms = 1 + (rng.bits() >> 16);
    m.lat = rng.range(-84.9, 84.9);
    m.lon = rng.range(-180.0, 179.9999);
    m.station_type = static_cast<StationType>(rng.bits() % 6);
    m.heading_deg = rng.range(0.0, 359.9999);
    m.speed_mps = rng.range(0.0, 655.35);
    m.accel_mps2 = rng.range(-3276.7, 3276.7);

    auto d = decode_cam(std::span<const uint8_t>(encode_cam(m)), grid);
    CHECK(d.station_id == m.station_id);
    CHECK(d.gen_time_ms == m.gen_time_ms);
    CHECK(d.station_type == m.station_type);
    CHECK(std::abs(d.lat - m.lat) <= 5e-8 + 1e-12);
    CHECK(std::abs(d.lon - m.lon) <= 5e-8 + 1e-12);
    double dh = std::abs(d.heading_deg - m.heading_deg);
    CHECK(std::min(dh, 360.0 - dh) <= 0.05 + 1e-9);
    CHECK(std::abs(d.speed_mps - m.speed_mps) <= 0.005 + 1e-9);
    CHECK(std::abs(d.accel_mps2 - m.accel_mps2) <= 0.05 + 1e-9);
    CHECK(d.cell == grid.cell_of({d.lat, d.lon}));
  }
}

TEST_CASE("heading just below 360 wraps to zero") {
  auto grid = make_grid();
  CamMessage m;
  m.station_id = 1;
  m.gen_time_ms = 1;
  m.lat = 52.0;
  m.lon = 13.0;
  m.heading_deg = 359.97;
  auto d = decode_cam(std::span<const uint8_t>(encode_cam(m)), grid);
  CHECK(d.heading_deg == 0.0);
}

TEST_CASE("encode rejects out-of-range fields") {
  CamMessage ok;
  ok.station_id = 1;
  ok.gen_time_ms = 1000;
  ok.lat = 52.0;
  ok.lon = 13.0;
  CHECK_NOTHROW(encode_cam(ok));

  auto expect_invalid = [](CamMessage m) {
    try {
      encode_cam(m);
      FAIL_CHECK("expected CodecError");
    } catch (const CodecError& e) {
      CHECK(e.code == CodecErrc::invalid_field);
    }
  };

  CamMessage m = ok;
  m.gen_time_ms = 0;
  expect_invalid(m);
  m = ok;
  m.lat = 85.0;
  expect_invalid(m);
  m = ok;
  m.lat = NAN;
  expect_invalid(m);
  m = ok;
  m.lon = 180.0;
  expect_invalid(m);
  m = ok;
  m.lon = -180.01;
  expect_invalid(m);
  m = ok;
  m.heading_deg = 360.0;
  expect_invalid(m);
  m = ok;
  m.heading_deg = -0.1;
  expect_invalid(m);
  m = ok;
  m.speed_mps = 655.36;
  expect_invalid(m);
  m = ok;
  m.speed_mps = -1.0;
  expect_invalid(m);
  m = ok;
  m.accel_mps2 = 3276.8;
  expect_invalid(m);
  m = ok;
  m.station_type = static_cast<StationType>(6);
  expect_invalid(m);
}

TEST_CASE("decode rejects malformed frames") {
  auto grid = make_grid();
  CamMessage ok;
  ok.station_id = 9;
  ok.gen_time_ms = 5;
  ok.lat = 52.0;
  ok.lon = 13.0;
  auto frame = encode_cam(ok);

  auto expect = [&](std::vector<uint8_t> bytes, CodecErrc want) {
    try {
      decode_cam(std::span<const uint8_t>(bytes.data(), bytes.size()), grid);
      FAIL_CHECK("expected CodecError");
    } catch (const CodecError& e) {
      CHECK(e.code == want);
    }
  };

  expect({frame.begin(), frame.end() - 1}, CodecErrc::truncated_frame);
  expect(std::vector<uint8_t>(35, 0), CodecErrc::truncated_frame);
  expect({}, CodecErrc::truncated_frame);

  std::vector<uint8_t> v(frame.begin(), frame.end());
  v[0] = 0xcb;
  expect(v, CodecErrc::bad_magic);

  v.assign(frame.begin(), frame.end());
  for (int i = 6; i < 14; ++i) v[i] = 0;  // gen_time 0
  expect(v, CodecErrc::field_out_of_range);

  v.assign(frame.begin(), frame.end());
  v[23] = 0x10;
  v[24] = 0x0e;  // heading 3600
  expect(v, CodecErrc::field_out_of_range);

  v.assign(frame.begin(), frame.end());
  v[22] = 6;  // station type out of range
  expect(v, CodecErrc::field_out_of_range);

  v.assign(frame.begin(), frame.end());
  v[17] = 0x36;  // latitude quantum > 900000000
  expect(v, CodecErrc::field_out_of_range);

  // Valid quantum but outside the indexable band.
  CamMessage polar = ok;
  polar.lat = 84.99;
  auto pf = encode_cam(polar);
  v.assign(pf.begin(), pf.end());
  // Bump the stored latitude to 85.1 deg: 851000000 = 0x32BAD5C0.
  v[14] = 0xc0;
  v[15] = 0xd5;
  v[16] = 0xba;
  v[17] = 0x32;
  expect(v, CodecErrc::field_out_of_range);
}

TEST_CASE("random frames never crash the decoder") {
  auto grid = make_grid();
  Rng rng(59);
  int decoded = 0;
  for (int i = 0; i < 5000; ++i) {
    std::vector<uint8_t> frame(kCamFrameSize);
    for (auto& b : frame) b = static_cast<uint8_t>(rng.bits());
    frame[0] = kCamMagic0;
    frame[1] = kCamMagic1;
    try {
      auto m = decode_cam(std::span<const uint8_t>(frame.data(), frame.size()), grid);
      CHECK(m.gen_time_ms > 0);
      CHECK(std::abs(m.lat) < 85.0);
      CHECK(m.lon >= -180.0);
      CHECK(m.lon < 180.0);
      CHECK(m.heading_deg >= 0.0);
      CHECK(m.heading_deg < 360.0);
      CHECK(m.speed_mps >= 0.0);
      ++decoded;
    } catch (const CodecError&) {
    }
  }
  CHECK(decoded > 0);  // some random payloads are valid
}
