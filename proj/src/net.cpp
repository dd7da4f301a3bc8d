#include "edm/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/resource.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "edm/strings.hpp"

namespace edm::net {

namespace {
[[noreturn]] void fail(const std::string& what) { throw NetError(what + ": " + std::strerror(errno)); }

sockaddr_in make_addr(const Endpoint& ep) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(ep.port);
  if (::inet_pton(AF_INET, ep.host.c_str(), &addr.sin_addr) != 1) {
    throw NetError("bad IPv4 address '" + ep.host + "'");
  }
  return addr;
}
}  // namespace

Endpoint Endpoint::parse(std::string_view hostport) {
  size_t colon = hostport.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == hostport.size()) {
    throw NetError("expected HOST:PORT, got '" + std::string(hostport) + "'");
  }
  auto port = strings::to_u64(hostport.substr(colon + 1));
  if (!port || *port > UINT16_MAX) throw NetError("bad port in '" + std::string(hostport) + "'");
  return {std::string(hostport.substr(0, colon)), static_cast<uint16_t>(*port)};
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

Socket& Socket::operator=(Socket&& o) noexcept {
  if (this != &o) {
    close();
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

void Socket::close() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

Socket Socket::connect_tcp(const Endpoint& ep, int timeout_ms) {
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) fail("socket");
  Socket sock(fd);
  sock.set_nonblocking(true);
  sockaddr_in addr = make_addr(ep);
  int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  if (rc != 0) {
    if (errno != EINPROGRESS) fail("connect " + ep.str());
    pollfd pfd{fd, POLLOUT, 0};
    rc = ::poll(&pfd, 1, timeout_ms);
    if (rc <= 0) throw NetError("connect " + ep.str() + (rc == 0 ? ": timed out" : ": poll failed"));
    int err = 0;
    socklen_t len = sizeof err;
    if (::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0) {
      errno = err;
      fail("connect " + ep.str());
    }
  }
  sock.set_nonblocking(false);
  sock.set_nodelay(true);
  return sock;
}

void Socket::set_nonblocking(bool on) {
  int flags = ::fcntl(fd_, F_GETFL, 0);
  if (flags < 0) fail("fcntl");
  flags = on ? (flags | O_NONBLOCK) : (flags & ~O_NONBLOCK);
  if (::fcntl(fd_, F_SETFL, flags) < 0) fail("fcntl");
}

void Socket::set_nodelay(bool on) {
  int v = on ? 1 : 0;
  if (::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &v, sizeof v) != 0) fail("setsockopt TCP_NODELAY");
}

long Socket::read_some(char* buf, size_t len) {
  while (true) {
    ssize_t n = ::recv(fd_, buf, len, 0);
    if (n >= 0) return n;
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) return -1;
    throw NetError(std::string("recv: ") + std::strerror(errno));
  }
}

long Socket::write_some(const char* buf, size_t len) {
  while (true) {
    ssize_t n = ::send(fd_, buf, len, MSG_NOSIGNAL);
    if (n >= 0) return n;
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK) return -1;
    throw NetError(std::string("send: ") + std::strerror(errno));
  }
}

TcpListener TcpListener::bind_listen(const Endpoint& ep, int backlog) {
  int fd = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
  if (fd < 0) fail("socket");
  TcpListener l;
  l.sock_ = Socket(fd);
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = make_addr(ep);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) fail("bind " + ep.str());
  if (::listen(fd, backlog) != 0) fail("listen");
  return l;
}

std::optional<Socket> TcpListener::accept() {
  while (true) {
    int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) return Socket(fd);
    if (errno == EINTR) continue;
    if (errno == EAGAIN || errno == EWOULDBLOCK || errno == ECONNABORTED) return std::nullopt;
    throw NetError(std::string("accept: ") + std::strerror(errno));
  }
}

Endpoint TcpListener::local_endpoint() const {
  sockaddr_in addr{};
  socklen_t len = sizeof addr;
  if (::getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getsockname");
  char buf[INET_ADDRSTRLEN];
  ::inet_ntop(AF_INET, &addr.sin_addr, buf, sizeof buf);
  return {buf, ntohs(addr.sin_port)};
}

void raise_fd_limit(uint64_t want) {
  rlimit lim{};
  if (::getrlimit(RLIMIT_NOFILE, &lim) != 0) return;
  if (lim.rlim_cur >= want) return;
  rlimit next = lim;
  next.rlim_cur = (lim.rlim_max == RLIM_INFINITY) ? want : std::min<rlim_t>(want, lim.rlim_max);
  ::setrlimit(RLIMIT_NOFILE, &next);
}

}  // namespace edm::net
