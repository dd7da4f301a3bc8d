#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include "edm/net.hpp"
#include "edm/wire.hpp"

namespace edm::bus {

struct PayloadTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BrokerConfig {
  net::Endpoint listen{"127.0.0.1", 0};  // port 0 binds an ephemeral port
  size_t max_payload = kDefaultMaxPayload;
  size_t session_outq_limit = 10'000;  // frames; overflow drops the oldest
};

struct BrokerCounters {
  uint64_t published = 0;   // PUBLISH frames accepted (external + internal)
  uint64_t delivered = 0;   // per-session deliveries (enqueued or callback run)
  uint64_t dropped = 0;     // outbound frames discarded on queue overflow
  uint64_t violations = 0;  // sessions closed for protocol errors
  size_t sessions = 0;      // live TCP sessions
};

// Delivery callback for in-process subscribers. Runs outside the broker lock;
// publishing from inside the callback is allowed. May be invoked concurrently
// when different publishers' messages fan in.
using InternalHandler = std::function<void(std::string_view topic, std::string_view payload)>;

// Single-threaded epoll broker carrying the framed protocol of docs/wire.md.
// Delivery is at-most-once: one delivery per matching session per publish, no
// retained messages, bounded per-session outbound queue with drop-oldest.
// A second CONNECT with an already-live client_id evicts the old session.
class BrokerServer {
 public:
  explicit BrokerServer(BrokerConfig cfg = {});
  ~BrokerServer();
  BrokerServer(const BrokerServer&) = delete;
  BrokerServer& operator=(const BrokerServer&) = delete;

  void start();  // bind + run the event loop; throws net::NetError
  void stop();   // close every session and join; idempotent

  net::Endpoint endpoint() const;  // actual listen address, valid after start()

  // In-process producer path; identical matching, counting and FIFO semantics
  // to a PUBLISH frame. Returns the delivery count. Throws PayloadTooLarge or
  // std::invalid_argument (bad topic).
  size_t publish(std::string_view topic, std::string_view payload);

  // In-process consumer path. client_id shares the eviction namespace with
  // nothing: internal subscribers cannot be evicted by TCP CONNECTs. Returns
  // a token for unsubscribe. Throws std::invalid_argument on a bad filter.
  uint64_t internal_subscribe(std::string client_id, std::vector<std::string> filters,
                              InternalHandler handler);
  void internal_unsubscribe(uint64_t token);

  BrokerCounters counters() const;

 private:
  struct Session {
    net::Socket sock;
    std::string client_id;
    bool connected = false;
    bool want_write = false;
    bool dying = false;
    std::string inbuf;
    size_t front_off = 0;  // bytes of outq.front() already written
    struct Out {
      std::shared_ptr<const std::string> frame;
      bool is_publish = false;  // only publishes count as delivered/dropped
    };
    std::deque<Out> outq;
    std::vector<std::string> filters;
    uint64_t last_seq = 0;  // publish-seq dedup stamp
  };

  struct InternalSub {
    uint64_t token = 0;
    std::string client_id;
    std::vector<std::string> filters;
    std::shared_ptr<const InternalHandler> handler;
    uint64_t last_seq = 0;
  };

  struct InternalDelivery {
    std::shared_ptr<const InternalHandler> handler;
    std::string topic;
    std::string payload;
  };

  void loop(std::stop_token st);
  void accept_all();
  void on_session_event(int fd, uint32_t events, std::vector<int>& to_close);
  void handle_frame(int fd, Session& s, const Frame& f, std::vector<int>& to_close);
  void violation(int fd, Session& s, const std::string& reason, std::vector<int>& to_close);
  void mark_close(int fd, std::vector<int>& to_close);
  void finish_close(int fd);
  void flush_session(int fd, Session& s);
  void enqueue(int fd, Session& s, const std::shared_ptr<const std::string>& frame, uint64_t seq);
  size_t route(std::string_view topic, std::string_view payload,
               std::vector<InternalDelivery>& internal_out);
  void add_filter(int fd, Session& s, const std::string& filter);
  void remove_session_filters(int fd, Session& s);
  void update_epoll(int fd, Session& s);

  BrokerConfig cfg_;
  net::TcpListener listener_;
  net::Endpoint bound_{};
  int epfd_ = -1;
  int event_fd_ = -1;
  std::jthread thread_;
  bool running_ = false;

  mutable std::mutex mu_;
  std::unordered_map<int, std::unique_ptr<Session>> sessions_;
  std::unordered_map<std::string, int> by_id_;
  std::unordered_map<std::string, std::vector<int>> exact_subs_;  // topic -> fds
  std::vector<std::pair<int, std::string>> wildcard_subs_;
  std::vector<InternalSub> internal_;
  uint64_t next_token_ = 1;
  uint64_t publish_seq_ = 0;
  BrokerCounters counters_;
  // Internal deliveries produced while handling a TCP PUBLISH; drained by the
  // loop thread after releasing the lock. Loop-thread state only.
  std::vector<InternalDelivery> pending_internal_;
};

}  // namespace edm::bus
