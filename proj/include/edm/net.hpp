#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace edm::net {

struct NetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Endpoint {
  std::string host = "127.0.0.1";
  uint16_t port = 0;

  static Endpoint parse(std::string_view hostport);  // throws NetError
  std::string str() const;
  bool operator==(const Endpoint&) const = default;
};

// RAII fd wrapper for TCP sockets.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  static Socket connect_tcp(const Endpoint& ep, int timeout_ms);  // throws NetError

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();
  int release() { return std::exchange(fd_, -1); }

  void set_nonblocking(bool on);
  void set_nodelay(bool on);

  // Returns bytes read/written, 0 on orderly shutdown (read), -1 on
  // EAGAIN/EWOULDBLOCK; throws NetError on hard errors.
  long read_some(char* buf, size_t len);
  long write_some(const char* buf, size_t len);

 private:
  int fd_ = -1;
};

class TcpListener {
 public:
  TcpListener() = default;
  static TcpListener bind_listen(const Endpoint& ep, int backlog = 512);

  std::optional<Socket> accept();  // nullopt on EAGAIN
  Endpoint local_endpoint() const;
  int fd() const { return sock_.fd(); }
  void set_nonblocking(bool on) { sock_.set_nonblocking(on); }

 private:
  Socket sock_;
};

// Best effort: raise RLIMIT_NOFILE toward `want` descriptors.
void raise_fd_limit(uint64_t want);

}  // namespace edm::net
