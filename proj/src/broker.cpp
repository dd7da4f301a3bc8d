#include "edm/broker.hpp"

#include <sys/epoll.h>
#include <sys/eventfd.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>

#include "edm/topic.hpp"

namespace edm::bus {

namespace {

bool is_wildcard(std::string_view filter) {
  return filter.find('+') != std::string_view::npos || filter.find('#') != std::string_view::npos;
}

std::shared_ptr<const std::string> disconnect_frame(const std::string& reason) {
  Frame f;
  f.kind = FrameKind::disconnect;
  f.payload = reason;
  return std::make_shared<const std::string>(encode_frame(f));
}

}  // namespace

BrokerServer::BrokerServer(BrokerConfig cfg) : cfg_(std::move(cfg)) {}

BrokerServer::~BrokerServer() { stop(); }

void BrokerServer::start() {
  if (running_) return;
  listener_ = net::TcpListener::bind_listen(cfg_.listen);
  listener_.set_nonblocking(true);
  bound_ = listener_.local_endpoint();

  epfd_ = epoll_create1(EPOLL_CLOEXEC);
  if (epfd_ < 0) throw net::NetError("epoll_create1 failed");
  event_fd_ = eventfd(0, EFD_CLOEXEC | EFD_NONBLOCK);
  if (event_fd_ < 0) throw net::NetError("eventfd failed");

  epoll_event ev{};
  ev.events = EPOLLIN;
  ev.data.fd = listener_.fd();
  epoll_ctl(epfd_, EPOLL_CTL_ADD, listener_.fd(), &ev);
  ev.data.fd = event_fd_;
  epoll_ctl(epfd_, EPOLL_CTL_ADD, event_fd_, &ev);

  running_ = true;
  thread_ = std::jthread([this](std::stop_token st) { loop(st); });
}

void BrokerServer::stop() {
  if (!running_) return;
  thread_.request_stop();
  uint64_t one = 1;
  [[maybe_unused]] ssize_t n = write(event_fd_, &one, sizeof(one));
  thread_.join();

  std::lock_guard lock(mu_);
  auto bye = disconnect_frame("broker shutting down");
  for (auto& [fd, s] : sessions_) {
    if (!s->dying && s->front_off == 0) {
      (void)s->sock.write_some(bye->data(), bye->size());
    }
  }
  sessions_.clear();
  by_id_.clear();
  exact_subs_.clear();
  wildcard_subs_.clear();
  close(event_fd_);
  close(epfd_);
  event_fd_ = epfd_ = -1;
  running_ = false;
}

net::Endpoint BrokerServer::endpoint() const { return bound_; }

BrokerCounters BrokerServer::counters() const {
  std::lock_guard lock(mu_);
  BrokerCounters c = counters_;
  c.sessions = sessions_.size();
  return c;
}

void BrokerServer::loop(std::stop_token st) {
  std::vector<epoll_event> evs(256);
  std::vector<int> to_close;
  while (!st.stop_requested()) {
    int n = epoll_wait(epfd_, evs.data(), static_cast<int>(evs.size()), 200);
    if (n < 0) {
      if (errno == EINTR) continue;
      break;
    }
    to_close.clear();
    for (int i = 0; i < n && !st.stop_requested(); ++i) {
      int fd = evs[i].data.fd;
      if (fd == event_fd_) {
        uint64_t v;
        while (read(event_fd_, &v, sizeof(v)) > 0) {
        }
        continue;
      }
      if (fd == listener_.fd()) {
        accept_all();
        continue;
      }
      on_session_event(fd, evs[i].events, to_close);
    }
    // Closes are deferred to the end of the batch so a kernel-reused fd
    // number can never alias a stale event from the same batch.
    for (int fd : to_close) finish_close(fd);
  }
}

void BrokerServer::accept_all() {
  while (auto sock = listener_.accept()) {
    sock->set_nonblocking(true);
    sock->set_nodelay(true);
    int fd = sock->fd();
    auto s = std::make_unique<Session>();
    s->sock = std::move(*sock);

    epoll_event ev{};
    ev.events = EPOLLIN;
    ev.data.fd = fd;
    if (epoll_ctl(epfd_, EPOLL_CTL_ADD, fd, &ev) != 0) continue;  // drops the socket

    std::lock_guard lock(mu_);
    sessions_.emplace(fd, std::move(s));
  }
}

void BrokerServer::update_epoll(int fd, Session& s) {
  epoll_event ev{};
  ev.events = EPOLLIN | (s.want_write ? EPOLLOUT : 0u);
  ev.data.fd = fd;
  epoll_ctl(epfd_, EPOLL_CTL_MOD, fd, &ev);
}

void BrokerServer::mark_close(int fd, std::vector<int>& to_close) {
  auto it = sessions_.find(fd);
  if (it == sessions_.end() || it->second->dying) return;
  Session& s = *it->second;
  s.dying = true;
  remove_session_filters(fd, s);
  auto idit = by_id_.find(s.client_id);
  if (idit != by_id_.end() && idit->second == fd) by_id_.erase(idit);
  to_close.push_back(fd);
}

void BrokerServer::finish_close(int fd) {
  std::lock_guard lock(mu_);
  epoll_ctl(epfd_, EPOLL_CTL_DEL, fd, nullptr);
  sessions_.erase(fd);
}

void BrokerServer::violation(int fd, Session& s, const std::string& reason,
                             std::vector<int>& to_close) {
  ++counters_.violations;
  if (s.front_off == 0) {
    // Best effort; anything the kernel cannot take right now is lost with
    // the connection, which is fine for an error notification.
    auto f = disconnect_frame(reason);
    (void)s.sock.write_some(f->data(), f->size());
  }
  mark_close(fd, to_close);
}

void BrokerServer::add_filter(int fd, Session& s, const std::string& filter) {
  s.filters.push_back(filter);
  if (is_wildcard(filter)) {
    wildcard_subs_.emplace_back(fd, filter);
  } else {
    exact_subs_[filter].push_back(fd);
  }
}

void BrokerServer::remove_session_filters(int fd, Session& s) {
  for (const std::string& filter : s.filters) {
    if (is_wildcard(filter)) {
      auto it = std::find(wildcard_subs_.begin(), wildcard_subs_.end(),
                          std::pair<int, std::string>{fd, filter});
      if (it != wildcard_subs_.end()) wildcard_subs_.erase(it);
    } else {
      auto it = exact_subs_.find(filter);
      if (it != exact_subs_.end()) {
        auto& fds = it->second;
        auto fit = std::find(fds.begin(), fds.end(), fd);
        if (fit != fds.end()) fds.erase(fit);
        if (fds.empty()) exact_subs_.erase(it);
      }
    }
  }
  s.filters.clear();
}

void BrokerServer::enqueue(int fd, Session& s, const std::shared_ptr<const std::string>& frame,
                           uint64_t seq) {
  if (s.dying) return;
  bool is_publish = seq != 0;
  if (is_publish) {
    if (s.last_seq == seq) return;  // at-most-once per publish per session
    s.last_seq = seq;
  }
  if (s.outq.size() >= cfg_.session_outq_limit) {
    // Drop-oldest, but never the frame that is partially on the wire.
    auto victim = s.outq.begin() + (s.front_off > 0 ? 1 : 0);
    if (victim->is_publish) ++counters_.dropped;
    s.outq.erase(victim);
  }
  s.outq.push_back({frame, is_publish});
  if (is_publish) ++counters_.delivered;
  if (!s.want_write) {
    s.want_write = true;
    update_epoll(fd, s);
  }
}

size_t BrokerServer::route(std::string_view topic, std::string_view payload,
                           std::vector<InternalDelivery>& internal_out) {
  ++counters_.published;
  uint64_t seq = ++publish_seq_;

  Frame pub;
  pub.kind = FrameKind::publish;
  pub.topic = std::string(topic);
  pub.payload = std::string(payload);
  std::shared_ptr<const std::string> encoded;  // built lazily: most publishes match nobody

  size_t delivered_before = counters_.delivered;
  auto offer = [&](int fd) {
    auto it = sessions_.find(fd);
    if (it == sessions_.end()) return;
    if (!encoded) encoded = std::make_shared<const std::string>(encode_frame(pub));
    enqueue(fd, *it->second, encoded, seq);
  };

  auto ex = exact_subs_.find(pub.topic);
  if (ex != exact_subs_.end()) {
    for (int fd : ex->second) offer(fd);
  }
  for (const auto& [fd, filter] : wildcard_subs_) {
    if (topic_matches(filter, topic)) offer(fd);
  }

  size_t count = counters_.delivered - delivered_before;
  for (InternalSub& sub : internal_) {
    if (sub.last_seq == seq) continue;
    for (const std::string& filter : sub.filters) {
      if (topic_matches(filter, topic)) {
        sub.last_seq = seq;
        internal_out.push_back({sub.handler, pub.topic, pub.payload});
        ++counters_.delivered;
        ++count;
        break;
      }
    }
  }
  return count;
}

size_t BrokerServer::publish(std::string_view topic, std::string_view payload) {
  if (!valid_topic(topic)) throw std::invalid_argument("invalid topic: " + std::string(topic));
  if (payload.size() > cfg_.max_payload) {
    throw PayloadTooLarge("payload " + std::to_string(payload.size()) + " > max " +
                          std::to_string(cfg_.max_payload));
  }
  std::vector<InternalDelivery> internal;
  size_t count;
  {
    std::lock_guard lock(mu_);
    count = route(topic, payload, internal);
  }
  for (const InternalDelivery& d : internal) (*d.handler)(d.topic, d.payload);
  return count;
}

uint64_t BrokerServer::internal_subscribe(std::string client_id, std::vector<std::string> filters,
                                          InternalHandler handler) {
  for (const std::string& f : filters) {
    if (!valid_filter(f)) throw std::invalid_argument("invalid filter: " + f);
  }
  std::lock_guard lock(mu_);
  InternalSub sub;
  sub.token = next_token_++;
  sub.client_id = std::move(client_id);
  sub.filters = std::move(filters);
  sub.handler = std::make_shared<const InternalHandler>(std::move(handler));
  internal_.push_back(std::move(sub));
  return internal_.back().token;
}

void BrokerServer::internal_unsubscribe(uint64_t token) {
  std::lock_guard lock(mu_);
  std::erase_if(internal_, [&](const InternalSub& s) { return s.token == token; });
}

void BrokerServer::handle_frame(int fd, Session& s, const Frame& f, std::vector<int>& to_close) {
  switch (f.kind) {
    case FrameKind::connect: {
      if (f.client_id.empty() || f.client_id.size() > kMaxTopicBytes) {
        violation(fd, s, "bad client_id", to_close);
        return;
      }
      auto it = by_id_.find(f.client_id);
      if (it != by_id_.end() && it->second != fd) {
        int old_fd = it->second;
        auto old = sessions_.find(old_fd);
        if (old != sessions_.end() && !old->second->dying && old->second->front_off == 0) {
          auto bye = disconnect_frame("evicted by new session");
          (void)old->second->sock.write_some(bye->data(), bye->size());
        }
        mark_close(old_fd, to_close);
      }
      if (!s.client_id.empty()) by_id_.erase(s.client_id);
      s.client_id = f.client_id;
      s.connected = true;
      by_id_[s.client_id] = fd;
      Frame ack;
      ack.kind = FrameKind::connack;
      enqueue(fd, s, std::make_shared<const std::string>(encode_frame(ack)), 0);
      return;
    }
    case FrameKind::subscribe: {
      if (!s.connected) {
        violation(fd, s, "SUBSCRIBE before CONNECT", to_close);
        return;
      }
      if (!valid_filter(f.filter)) {
        violation(fd, s, "invalid filter", to_close);
        return;
      }
      // Filter becomes active before the SUBACK is queued; both happen under
      // one lock hold, so no publish can slip between them.
      add_filter(fd, s, f.filter);
      Frame ack;
      ack.kind = FrameKind::suback;
      enqueue(fd, s, std::make_shared<const std::string>(encode_frame(ack)), 0);
      return;
    }
    case FrameKind::publish: {
      if (!s.connected) {
        violation(fd, s, "PUBLISH before CONNECT", to_close);
        return;
      }
      if (!valid_topic(f.topic)) {
        violation(fd, s, "invalid topic", to_close);
        return;
      }
      // Internal deliveries run after the lock is released by the caller.
      pending_internal_.clear();
      route(f.topic, f.payload, pending_internal_);
      return;
    }
    case FrameKind::ping: {
      Frame pong;
      pong.kind = FrameKind::pong;
      enqueue(fd, s, std::make_shared<const std::string>(encode_frame(pong)), 0);
      return;
    }
    case FrameKind::disconnect:
      mark_close(fd, to_close);
      return;
    case FrameKind::connack:
    case FrameKind::suback:
    case FrameKind::pong:
      violation(fd, s, "server-only frame kind", to_close);
      return;
  }
  violation(fd, s, "unknown frame kind", to_close);
}

void BrokerServer::flush_session(int fd, Session& s) {
  while (!s.outq.empty()) {
    const std::string& front = *s.outq.front().frame;
    long n = s.sock.write_some(front.data() + s.front_off, front.size() - s.front_off);
    if (n < 0) return;  // kernel buffer full; EPOLLOUT stays armed
    s.front_off += static_cast<size_t>(n);
    if (s.front_off == front.size()) {
      s.outq.pop_front();
      s.front_off = 0;
    }
  }
  if (s.want_write) {
    s.want_write = false;
    update_epoll(fd, s);
  }
}

void BrokerServer::on_session_event(int fd, uint32_t events, std::vector<int>& to_close) {
  std::unique_lock lock(mu_);
  auto it = sessions_.find(fd);
  if (it == sessions_.end() || it->second->dying) return;
  Session& s = *it->second;

  if (events & (EPOLLHUP | EPOLLERR)) {
    mark_close(fd, to_close);
    return;
  }

  if (events & EPOLLOUT) {
    try {
      flush_session(fd, s);
    } catch (const net::NetError&) {
      mark_close(fd, to_close);
      return;
    }
  }

  if (events & EPOLLIN) {
    char buf[64 * 1024];
    for (;;) {
      long n;
      try {
        n = s.sock.read_some(buf, sizeof(buf));
      } catch (const net::NetError&) {
        mark_close(fd, to_close);
        return;
      }
      if (n < 0) break;  // drained
      if (n == 0) {      // peer closed
        mark_close(fd, to_close);
        return;
      }
      s.inbuf.append(buf, static_cast<size_t>(n));
      size_t off = 0;
      Frame f;
      for (;;) {
        size_t consumed;
        try {
          consumed = decode_frame(std::string_view(s.inbuf).substr(off), f, cfg_.max_payload);
        } catch (const WireError& e) {
          violation(fd, s, e.what(), to_close);
          return;
        }
        if (consumed == 0) break;
        off += consumed;
        handle_frame(fd, s, f, to_close);
        if (!pending_internal_.empty()) {
          // Run callbacks without the lock, then resume. The inbuf is
          // per-session state only this thread touches.
          std::vector<InternalDelivery> run;
          run.swap(pending_internal_);
          lock.unlock();
          for (const InternalDelivery& d : run) (*d.handler)(d.topic, d.payload);
          lock.lock();
          it = sessions_.find(fd);
          if (it == sessions_.end() || it->second->dying) return;
        }
        if (s.dying) break;
      }
      s.inbuf.erase(0, off);
      if (s.dying) return;
      if (static_cast<size_t>(n) < sizeof(buf)) break;
    }
  }
}

}  // namespace edm::bus
