#include "edm/broker_client.hpp"

#include <poll.h>

#include <chrono>

namespace edm::bus {

namespace {

int64_t now_steady_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

BrokerClient BrokerClient::connect(const net::Endpoint& ep, std::string client_id) {
  return connect(ep, std::move(client_id), Options{});
}

BrokerClient BrokerClient::connect(const net::Endpoint& ep, std::string client_id, Options opt) {
  BrokerClient c;
  c.opt_ = opt;
  c.client_id_ = std::move(client_id);
  c.sock_ = net::Socket::connect_tcp(ep, opt.timeout_ms);
  Frame f;
  f.kind = FrameKind::connect;
  f.client_id = c.client_id_;
  c.send_frame(f);
  c.wait_for(FrameKind::connack);
  return c;
}

void BrokerClient::fail(const std::string& why) {
  sock_.close();
  throw net::NetError(why);
}

void BrokerClient::send_frame(const Frame& f) {
  if (!sock_.valid()) throw net::NetError("client is closed");
  std::string bytes = encode_frame(f);
  size_t off = 0;
  while (off < bytes.size()) {
    long n = sock_.write_some(bytes.data() + off, bytes.size() - off);
    if (n < 0) {  // blocking socket: only possible under SO_SNDTIMEO, treat as stall
      struct pollfd pfd{sock_.fd(), POLLOUT, 0};
      if (::poll(&pfd, 1, opt_.timeout_ms) <= 0) fail("write stalled");
      continue;
    }
    off += static_cast<size_t>(n);
  }
}

void BrokerClient::drain_once() {
  if (!sock_.valid()) throw net::NetError("client is closed");
  char buf[64 * 1024];
  long n = sock_.read_some(buf, sizeof(buf));
  if (n == 0) fail("connection closed by broker" +
                   (close_reason_.empty() ? "" : " (" + close_reason_ + ")"));
  if (n < 0) return;  // spurious wakeup on a nonblocking fd
  inbuf_.append(buf, static_cast<size_t>(n));

  size_t off = 0;
  Frame f;
  for (;;) {
    size_t consumed = decode_frame(std::string_view(inbuf_).substr(off), f, opt_.max_payload);
    if (consumed == 0) break;
    off += consumed;
    if (f.kind == FrameKind::publish) {
      pending_.push_back({std::move(f.topic), std::move(f.payload)});
    } else if (f.kind == FrameKind::disconnect) {
      close_reason_ = f.payload;
      inbuf_.erase(0, off);
      fail("broker disconnected: " + close_reason_);
    }
    // connack/suback/pong are consumed by wait_for via acks_.
    else {
      acks_.push_back(f.kind);
    }
  }
  inbuf_.erase(0, off);
}

void BrokerClient::wait_for(FrameKind kind) {
  int64_t deadline = now_steady_ms() + opt_.timeout_ms;
  for (;;) {
    for (size_t i = 0; i < acks_.size(); ++i) {
      if (acks_[i] == kind) {
        acks_.erase(acks_.begin() + static_cast<long>(i));
        return;
      }
    }
    int64_t left = deadline - now_steady_ms();
    if (left <= 0) fail("timed out waiting for ack");
    struct pollfd pfd{sock_.fd(), POLLIN, 0};
    int r = ::poll(&pfd, 1, static_cast<int>(left));
    if (r < 0) fail("poll failed");
    if (r == 0) fail("timed out waiting for ack");
    drain_once();
  }
}

void BrokerClient::subscribe(const std::string& filter) {
  Frame f;
  f.kind = FrameKind::subscribe;
  f.filter = filter;
  send_frame(f);
  wait_for(FrameKind::suback);
}

void BrokerClient::publish(std::string_view topic, std::string_view payload) {
  Frame f;
  f.kind = FrameKind::publish;
  f.topic = std::string(topic);
  f.payload = std::string(payload);
  send_frame(f);
}

void BrokerClient::ping() {
  Frame f;
  f.kind = FrameKind::ping;
  send_frame(f);
  wait_for(FrameKind::pong);
}

void BrokerClient::disconnect() {
  if (!sock_.valid()) return;
  Frame f;
  f.kind = FrameKind::disconnect;
  try {
    send_frame(f);
  } catch (const net::NetError&) {
  }
  sock_.close();
}

std::optional<BrokerClient::Delivery> BrokerClient::take() {
  if (pending_.empty()) return std::nullopt;
  Delivery d = std::move(pending_.front());
  pending_.pop_front();
  return d;
}

std::optional<BrokerClient::Delivery> BrokerClient::poll(int timeout_ms) {
  if (auto d = take()) return d;
  if (!sock_.valid()) throw net::NetError("client is closed");
  int64_t deadline = now_steady_ms() + timeout_ms;
  for (;;) {
    int64_t left = deadline - now_steady_ms();
    if (left < 0) return std::nullopt;
    struct pollfd pfd{sock_.fd(), POLLIN, 0};
    int r = ::poll(&pfd, 1, static_cast<int>(left));
    if (r < 0) fail("poll failed");
    if (r == 0) return std::nullopt;
    drain_once();
    if (auto d = take()) return d;
  }
}

}  // namespace edm::bus
