#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace edm::bus {

// Broker framing: 4-byte big-endian body length, then a 1-byte kind tag and a
// kind-specific body. Strings are 2-byte big-endian length + UTF-8. See
// docs/wire.md.
enum class FrameKind : uint8_t {
  connect = 1,
  connack = 2,
  subscribe = 3,
  suback = 4,
  publish = 5,
  ping = 6,
  pong = 7,
  disconnect = 8,
};

struct Frame {
  FrameKind kind = FrameKind::ping;
  std::string client_id;  // CONNECT
  std::string filter;     // SUBSCRIBE
  std::string topic;      // PUBLISH
  std::string payload;    // PUBLISH bytes; DISCONNECT reason
};

struct WireError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr size_t kDefaultMaxPayload = 64 * 1024;

void append_frame(std::string& out, const Frame& f);
std::string encode_frame(const Frame& f);

// Tries to decode one frame from the head of `buf`. Returns the number of
// bytes consumed, or 0 if more data is needed. Throws WireError on malformed
// or oversized input.
size_t decode_frame(std::string_view buf, Frame& out, size_t max_payload = kDefaultMaxPayload);

}  // namespace edm::bus
