#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>

#include "edm/hexgrid.hpp"

namespace edm::cam {

enum class StationType : uint8_t { car = 0, truck = 1, bus = 2, motorcycle = 3, rsu = 4, other = 5 };

const char* to_string(StationType t);
std::optional<StationType> station_type_from(std::string_view name);

// The CAM subset carried on the wire and stored in the EDM. `cell` is always
// derived server-side from lat/lon under the deployment grid, never trusted
// from the wire.
struct CamMessage {
  uint32_t station_id = 0;
  uint64_t gen_time_ms = 0;  // Unix epoch ms, > 0
  double lat = 0.0;
  double lon = 0.0;
  StationType station_type = StationType::car;
  double heading_deg = 0.0;  // clockwise from true north, [0, 360)
  double speed_mps = 0.0;
  double accel_mps2 = 0.0;
  geo::CellId cell;
};

// Fixed 34-byte little-endian frame; see docs/wire.md for the exact layout.
inline constexpr size_t kCamFrameSize = 34;
inline constexpr uint8_t kCamMagic0 = 0xCA;
inline constexpr uint8_t kCamMagic1 = 0x01;

// Field quantization steps of the wire format.
inline constexpr double kLatLonQuantumDeg = 1e-7;
inline constexpr double kHeadingQuantumDeg = 0.1;
inline constexpr double kSpeedQuantumMps = 0.01;
inline constexpr double kAccelQuantumMps2 = 0.1;

enum class CodecErrc { invalid_field, truncated_frame, bad_magic, field_out_of_range };

struct CodecError : std::runtime_error {
  CodecError(CodecErrc c, const std::string& what) : std::runtime_error(what), code(c) {}
  CodecErrc code;
};

std::array<uint8_t, kCamFrameSize> encode_cam(const CamMessage& m);

// Decodes one frame and recomputes the cell under `grid`. Throws CodecError.
CamMessage decode_cam(std::span<const uint8_t> frame, const geo::HexGrid& grid);

// Decode without assigning a cell, for consumers (the registry) that have no
// grid. `cell` stays default-constructed.
CamMessage decode_cam_raw(std::span<const uint8_t> frame);

inline CamMessage decode_cam(std::string_view frame, const geo::HexGrid& grid) {
  return decode_cam(std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(frame.data()), frame.size()),
                    grid);
}

}  // namespace edm::cam
