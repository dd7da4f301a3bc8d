#include "edm/wire.hpp"

#include "edm/bytes.hpp"
#include "edm/topic.hpp"

namespace edm::bus {

namespace {

constexpr size_t kFrameOverhead = 512;  // kind + strings headroom on top of max_payload

void append_string(std::string& out, std::string_view s) {
  if (s.size() > UINT16_MAX) throw WireError("string field too long");
  uint8_t len[2];
  bytes::store_u16_be(len, static_cast<uint16_t>(s.size()));
  out.append(reinterpret_cast<const char*>(len), 2);
  out.append(s);
}

std::string_view take_string(std::string_view& body) {
  if (body.size() < 2) throw WireError("truncated string field");
  uint16_t n = bytes::load_u16_be(reinterpret_cast<const uint8_t*>(body.data()));
  body.remove_prefix(2);
  if (body.size() < n) throw WireError("truncated string field");
  std::string_view s = body.substr(0, n);
  body.remove_prefix(n);
  return s;
}

}  // namespace

void append_frame(std::string& out, const Frame& f) {
  size_t len_pos = out.size();
  out.append(4, '\0');
  out.push_back(static_cast<char>(f.kind));
  switch (f.kind) {
    case FrameKind::connect:
      append_string(out, f.client_id);
      break;
    case FrameKind::subscribe:
      append_string(out, f.filter);
      break;
    case FrameKind::publish:
      append_string(out, f.topic);
      out.append(f.payload);
      break;
    case FrameKind::disconnect:
      append_string(out, f.payload);
      break;
    case FrameKind::connack:
    case FrameKind::suback:
    case FrameKind::ping:
    case FrameKind::pong:
      break;
  }
  size_t body_len = out.size() - len_pos - 4;
  bytes::store_u32_be(reinterpret_cast<uint8_t*>(out.data() + len_pos), static_cast<uint32_t>(body_len));
}

std::string encode_frame(const Frame& f) {
  std::string out;
  append_frame(out, f);
  return out;
}

size_t decode_frame(std::string_view buf, Frame& out, size_t max_payload) {
  if (buf.size() < 4) return 0;
  uint32_t body_len = bytes::load_u32_be(reinterpret_cast<const uint8_t*>(buf.data()));
  if (body_len < 1) throw WireError("empty frame body");
  if (body_len > max_payload + kFrameOverhead) throw WireError("frame exceeds size limit");
  if (buf.size() < 4 + static_cast<size_t>(body_len)) return 0;

  std::string_view body = buf.substr(4, body_len);
  uint8_t kind = static_cast<uint8_t>(body.front());
  body.remove_prefix(1);
  if (kind < 1 || kind > 8) throw WireError("unknown frame kind");

  out = Frame{};
  out.kind = static_cast<FrameKind>(kind);
  switch (out.kind) {
    case FrameKind::connect:
      out.client_id = take_string(body);
      break;
    case FrameKind::subscribe:
      out.filter = take_string(body);
      break;
    case FrameKind::publish: {
      out.topic = take_string(body);
      if (body.size() > max_payload) throw WireError("payload exceeds limit");
      out.payload = body;
      body = {};
      break;
    }
    case FrameKind::disconnect:
      out.payload = take_string(body);
      break;
    case FrameKind::connack:
    case FrameKind::suback:
    case FrameKind::ping:
    case FrameKind::pong:
      break;
  }
  if (!body.empty() && out.kind != FrameKind::publish) throw WireError("trailing bytes in frame body");
  return 4 + body_len;
}

}  // namespace edm::bus
