#include "edm/cam.hpp"

#include <cmath>

#include "edm/bytes.hpp"

namespace edm::cam {

const char* to_string(StationType t) {
  switch (t) {
    case StationType::car: return "car";
    case StationType::truck: return "truck";
    case StationType::bus: return "bus";
    case StationType::motorcycle: return "motorcycle";
    case StationType::rsu: return "rsu";
    case StationType::other: return "other";
  }
  return "other";
}

std::optional<StationType> station_type_from(std::string_view name) {
  for (uint8_t i = 0; i <= static_cast<uint8_t>(StationType::other); ++i) {
    auto t = static_cast<StationType>(i);
    if (name == to_string(t)) return t;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void invalid(const char* what) { throw CodecError(CodecErrc::invalid_field, what); }

// Representable ranges of the quantized wire fields.
constexpr double kMaxSpeed = 655.35;
constexpr double kMaxAccel = 3276.7;

}  // namespace

std::array<uint8_t, kCamFrameSize> encode_cam(const CamMessage& m) {
  if (m.gen_time_ms == 0) invalid("gen_time_ms must be > 0");
  if (!std::isfinite(m.lat) || !std::isfinite(m.lon)) invalid("non-finite position");
  if (std::abs(m.lat) >= geo::kMaxProjectionLatDeg) invalid("latitude outside indexable band");
  if (m.lon < -180.0 || m.lon >= 180.0) invalid("longitude not normalized");
  if (!std::isfinite(m.heading_deg) || m.heading_deg < 0.0 || m.heading_deg >= 360.0) invalid("heading out of range");
  if (!std::isfinite(m.speed_mps) || m.speed_mps < 0.0 || m.speed_mps > kMaxSpeed) invalid("speed out of range");
  if (!std::isfinite(m.accel_mps2) || std::abs(m.accel_mps2) > kMaxAccel) invalid("acceleration out of range");
  if (static_cast<uint8_t>(m.station_type) > static_cast<uint8_t>(StationType::other)) invalid("bad station type");

  std::array<uint8_t, kCamFrameSize> out{};
  uint8_t* p = out.data();
  p[0] = kCamMagic0;
  p[1] = kCamMagic1;
  bytes::store_u32_le(p + 2, m.station_id);
  bytes::store_u64_le(p + 6, m.gen_time_ms);
  bytes::store_u32_le(p + 14, static_cast<uint32_t>(static_cast<int32_t>(std::llround(m.lat / kLatLonQuantumDeg))));
  bytes::store_u32_le(p + 18, static_cast<uint32_t>(static_cast<int32_t>(std::llround(m.lon / kLatLonQuantumDeg))));
  p[22] = static_cast<uint8_t>(m.station_type);
  // Heading 359.96..359.99 rounds to the 3600 quantum; wrap to 0.
  bytes::store_u16_le(p + 23, static_cast<uint16_t>(std::llround(m.heading_deg / kHeadingQuantumDeg) % 3600));
  bytes::store_u16_le(p + 25, static_cast<uint16_t>(std::llround(m.speed_mps / kSpeedQuantumMps)));
  bytes::store_u16_le(p + 27, static_cast<uint16_t>(static_cast<int16_t>(std::llround(m.accel_mps2 / kAccelQuantumMps2))));
  // bytes 29..33 reserved, zero
  return out;
}

CamMessage decode_cam_raw(std::span<const uint8_t> frame) {
  if (frame.size() != kCamFrameSize) {
    throw CodecError(CodecErrc::truncated_frame, "CAM frame must be 34 bytes");
  }
  const uint8_t* p = frame.data();
  if (p[0] != kCamMagic0 || p[1] != kCamMagic1) {
    throw CodecError(CodecErrc::bad_magic, "bad CAM magic");
  }

  auto out_of_range = [](const char* what) -> CodecError {
    return CodecError(CodecErrc::field_out_of_range, what);
  };

  CamMessage m;
  m.station_id = bytes::load_u32_le(p + 2);
  m.gen_time_ms = bytes::load_u64_le(p + 6);
  if (m.gen_time_ms == 0) throw out_of_range("gen_time_ms is zero");

  int32_t lat_q = static_cast<int32_t>(bytes::load_u32_le(p + 14));
  int32_t lon_q = static_cast<int32_t>(bytes::load_u32_le(p + 18));
  if (lat_q < -900000000 || lat_q > 900000000) throw out_of_range("latitude quantum");
  if (lon_q < -1800000000 || lon_q >= 1800000000) throw out_of_range("longitude quantum");
  m.lat = lat_q * kLatLonQuantumDeg;
  m.lon = lon_q * kLatLonQuantumDeg;

  uint8_t type_q = p[22];
  if (type_q > static_cast<uint8_t>(StationType::other)) throw out_of_range("station type");
  m.station_type = static_cast<StationType>(type_q);

  uint16_t heading_q = bytes::load_u16_le(p + 23);
  if (heading_q >= 3600) throw out_of_range("heading quantum");
  m.heading_deg = heading_q * kHeadingQuantumDeg;

  m.speed_mps = bytes::load_u16_le(p + 25) * kSpeedQuantumMps;
  m.accel_mps2 = static_cast<int16_t>(bytes::load_u16_le(p + 27)) * kAccelQuantumMps2;
  return m;
}

CamMessage decode_cam(std::span<const uint8_t> frame, const geo::HexGrid& grid) {
  CamMessage m = decode_cam_raw(frame);
  try {
    m.cell = grid.cell_of({m.lat, m.lon});
  } catch (const geo::OutOfProjectionDomain&) {
    throw CodecError(CodecErrc::field_out_of_range, "position outside indexable band");
  }
  return m;
}

}  // namespace edm::cam
