#pragma once

#include <deque>
#include <optional>
#include <string>
#include <string_view>

#include "edm/net.hpp"
#include "edm/wire.hpp"

namespace edm::bus {

// Blocking client for one broker connection. Not thread-safe; one owner
// thread drives it. PUBLISH frames that arrive while waiting for an ack are
// queued and come back out of poll()/take().
//
// Multiplexed use (many clients, one thread): watch fd() with poll(2); on
// readability call drain_once(), then take() until empty. drain_once() does a
// single read and never blocks when the fd is readable.
class BrokerClient {
 public:
  struct Options {
    int timeout_ms = 5000;  // connect and ack waits
    size_t max_payload = kDefaultMaxPayload;
  };

  struct Delivery {
    std::string topic;
    std::string payload;
  };

  BrokerClient() = default;

  // TCP connect + CONNECT/CONNACK handshake. Throws net::NetError.
  static BrokerClient connect(const net::Endpoint& ep, std::string client_id, Options opt);
  static BrokerClient connect(const net::Endpoint& ep, std::string client_id);

  void subscribe(const std::string& filter);                       // waits for SUBACK
  void publish(std::string_view topic, std::string_view payload);  // at-most-once, no ack
  void ping();                                                     // waits for PONG
  void disconnect();                                               // best-effort DISCONNECT + close

  // Next delivery, waiting up to timeout_ms (0 = only what is already
  // queued/readable). nullopt on timeout.
  std::optional<Delivery> poll(int timeout_ms);

  std::optional<Delivery> take();  // queued only, no I/O
  void drain_once();               // one read + decode; throws net::NetError on EOF/error

  int fd() const { return sock_.fd(); }
  bool connected() const { return sock_.valid(); }
  const std::string& client_id() const { return client_id_; }

  // Reason from a broker DISCONNECT, if one was received before close.
  const std::string& close_reason() const { return close_reason_; }

 private:
  void send_frame(const Frame& f);
  // Reads until a frame of `kind` arrives; queues PUBLISH frames seen on the
  // way. Throws net::NetError on timeout, EOF, or broker DISCONNECT.
  void wait_for(FrameKind kind);
  void fail(const std::string& why);

  net::Socket sock_;
  std::string client_id_;
  std::string inbuf_;
  std::deque<Delivery> pending_;
  std::deque<FrameKind> acks_;  // connack/suback/pong awaiting a waiter
  std::string close_reason_;
  Options opt_;
};

}  // namespace edm::bus
