#include "edm/fleet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "edm/log.hpp"
#include "edm/strings.hpp"

namespace edm::fleet {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMPerDegLat = 6'371'000.0 * kPi / 180.0;

double normalize_heading(double deg) {
  double h = std::fmod(deg, 360.0);
  if (h < 0.0) h += 360.0;
  if (h >= 360.0) h = 0.0;
  return h;
}

}  // namespace

void SyntheticModel::validate() const {
  if (!(lat_min < lat_max) || !(lon_min < lon_max)) {
    throw std::invalid_argument("synthetic bbox bounds out of order");
  }
  if (std::abs(lat_min) > 85.0 || std::abs(lat_max) > 85.0) {
    throw std::invalid_argument("synthetic bbox outside the indexable band");
  }
  if (n_vehicles == 0) throw std::invalid_argument("n_vehicles must be > 0");
  if (!(speed_min_mps > 0.0) || !(speed_max_mps >= speed_min_mps)) {
    throw std::invalid_argument("speed range must satisfy 0 < min <= max");
  }
}

void FleetConfig::validate() const {
  if (rate_hz < 1.0 || rate_hz > 10.0) {
    throw std::invalid_argument("send rate must lie in [1, 10] Hz");
  }
  if (workers == 0) throw std::invalid_argument("workers must be > 0");
  if (synthetic.has_value() == fcd.has_value()) {
    throw std::invalid_argument("exactly one of synthetic/fcd must be set");
  }
  if (synthetic) synthetic->validate();
  if (fcd && fcd->path.empty()) throw std::invalid_argument("fcd path must be set");
}

Trajectory::Trajectory(const SyntheticModel& m, uint32_t index)
    : m_(m), rng_(m.seed, index) {
  double mid_lat = (m_.lat_min + m_.lat_max) / 2.0;
  m_per_deg_lat_ = kMPerDegLat;
  m_per_deg_lon_ = kMPerDegLat * std::cos(mid_lat * kPi / 180.0);
  pos_ = {rng_.uniform(m_.lat_min, m_.lat_max), rng_.uniform(m_.lon_min, m_.lon_max)};
  pick_leg();
}

void Trajectory::pick_leg() {
  for (int attempt = 0; attempt < 16; ++attempt) {
    target_ = {rng_.uniform(m_.lat_min, m_.lat_max), rng_.uniform(m_.lon_min, m_.lon_max)};
    double dn = (target_.lat - pos_.lat) * m_per_deg_lat_;
    double de = (target_.lon - pos_.lon) * m_per_deg_lon_;
    if (std::hypot(de, dn) < 1.0) continue;  // degenerate leg, draw again
    speed_ = rng_.uniform(m_.speed_min_mps, m_.speed_max_mps);
    heading_ = normalize_heading(std::atan2(de, dn) * 180.0 / kPi);
    return;
  }
  speed_ = m_.speed_min_mps;  // pathological bbox; stand still on a valid leg
}

void Trajectory::advance(double dt_s) {
  double remaining_s = dt_s;
  while (remaining_s > 0.0) {
    double dn = (target_.lat - pos_.lat) * m_per_deg_lat_;
    double de = (target_.lon - pos_.lon) * m_per_deg_lon_;
    double dist = std::hypot(de, dn);
    double leg_s = dist / speed_;
    if (remaining_s < leg_s) {
      double f = remaining_s * speed_ / dist;
      pos_.lat += (target_.lat - pos_.lat) * f;
      pos_.lon += (target_.lon - pos_.lon) * f;
      return;
    }
    pos_ = target_;
    remaining_s -= leg_s;
    pick_leg();
  }
}

cam::CamMessage SyntheticSource::next(double dt_s, uint32_t station_id, uint64_t gen_time_ms) {
  traj_.advance(dt_s);
  cam::CamMessage m;
  m.station_id = station_id;
  m.gen_time_ms = gen_time_ms;
  m.lat = traj_.position().lat;
  m.lon = traj_.position().lon;
  m.station_type = type_;
  m.heading_deg = traj_.heading_deg();
  m.speed_mps = traj_.speed_mps();
  m.accel_mps2 = first_ ? 0.0 : (m.speed_mps - prev_speed_) / dt_s;
  prev_speed_ = m.speed_mps;
  first_ = false;
  return m;
}

FleetRunner::FleetRunner(FleetConfig cfg, Clock& clock)
    : cfg_(std::move(cfg)), clock_(clock), grid_(cfg_.grid) {
  cfg_.validate();
  period_ms_ = static_cast<uint64_t>(std::llround(1000.0 / cfg_.rate_hz));
  if (cfg_.synthetic) {
    n_agents_ = cfg_.synthetic->n_vehicles;
  } else {
    std::ifstream in(cfg_.fcd->path);
    if (!in) throw std::invalid_argument("cannot open fcd file: " + cfg_.fcd->path);
    fcd_steps_ = fcd::parse_fcd(in);
    if (fcd_steps_.empty()) throw std::invalid_argument("fcd file has no timesteps");
    std::unordered_map<std::string, size_t> by_name;
    for (const auto& step : fcd_steps_) {
      for (const auto& v : step.vehicles) {
        if (by_name.emplace(v.name, fcd_names_.size()).second) fcd_names_.push_back(v.name);
      }
    }
    n_agents_ = fcd_names_.size();
    if (n_agents_ == 0) throw std::invalid_argument("fcd file has no vehicles");
  }
}

FleetRunner::~FleetRunner() { stop(); }

void FleetRunner::start() {
  if (running_) return;
  running_ = true;
  fcd_t0_ms_ = clock_.now_ms();
  size_t workers = std::min(cfg_.workers, n_agents_);
  size_t per = (n_agents_ + workers - 1) / workers;
  for (size_t w = 0; w < workers; ++w) {
    size_t begin = w * per;
    size_t end = std::min(n_agents_, begin + per);
    if (begin >= end) break;
    threads_.emplace_back([this, begin, end](std::stop_token st) { worker(st, begin, end); });
  }
}

void FleetRunner::stop() {
  if (!running_) return;
  for (auto& t : threads_) t.request_stop();
  threads_.clear();  // joins
  running_ = false;
}

FleetCounters FleetRunner::counters() const {
  FleetCounters c;
  c.logins = ctr_.logins.load(std::memory_order_relaxed);
  c.login_failures = ctr_.login_failures.load(std::memory_order_relaxed);
  c.frames = ctr_.frames.load(std::memory_order_relaxed);
  c.handovers = ctr_.handovers.load(std::memory_order_relaxed);
  c.handover_noops = ctr_.handover_noops.load(std::memory_order_relaxed);
  c.handover_failures = ctr_.handover_failures.load(std::memory_order_relaxed);
  c.reconnects = ctr_.reconnects.load(std::memory_order_relaxed);
  return c;
}

bool FleetRunner::login(bus::BrokerClient& reg, Agent& a) {
  uint32_t nonce = 0xC0000000u | a.index;
  std::string response_topic = cfg_.registry_id + "/login_response/" + std::to_string(nonce);
  reg.subscribe(response_topic);

  cam::CamMessage m;
  m.station_id = nonce;
  m.gen_time_ms = std::max<uint64_t>(clock_.now_ms(), 1);
  m.station_type = cfg_.station_type;
  if (a.source) {
    m.lat = a.source->position().lat;
    m.lon = a.source->position().lon;
    m.speed_mps = a.source->speed_mps();
  } else {
    // First appearance in the replay; every agent has one by construction.
    for (const auto& step : fcd_steps_) {
      auto it = std::find_if(step.vehicles.begin(), step.vehicles.end(),
                             [&](const fcd::FcdVehicle& v) { return v.name == fcd_names_[a.index]; });
      if (it != step.vehicles.end()) {
        m.lat = it->lat;
        m.lon = it->lon;
        m.heading_deg = normalize_heading(it->heading_deg);
        m.speed_mps = it->speed_mps;
        break;
      }
    }
  }
  auto bytes = cam::encode_cam(m);
  reg.publish(cfg_.registry_id + "/vehicle/login",
              std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));

  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(cfg_.io_timeout_ms);
  while (std::chrono::steady_clock::now() < deadline) {
    auto d = reg.poll(50);
    if (!d || d->topic != response_topic) continue;
    if (strings::starts_with(d->payload, "error=")) {
      ctr_.login_failures.fetch_add(1, std::memory_order_relaxed);
      log::warn("fleet: login rejected for agent %u: %s", a.index, d->payload.c_str());
      return false;
    }
    auto vid = strings::kv_get(d->payload, "vehicle_id");
    auto mec = strings::kv_get(d->payload, "mec_id");
    auto ep = strings::kv_get(d->payload, "endpoint");
    auto vid_n = vid ? strings::to_u64(*vid) : std::nullopt;
    if (!vid_n || !mec || !ep) {
      ctr_.login_failures.fetch_add(1, std::memory_order_relaxed);
      return false;
    }
    bus::BrokerClient::Options opt;
    opt.timeout_ms = cfg_.io_timeout_ms;
    try {
      auto cli = bus::BrokerClient::connect(net::Endpoint::parse(std::string(*ep)),
                                            "veh-" + std::string(*vid), opt);
      cli.subscribe(std::string(*mec) + "/handover/" + std::string(*vid));
      a.cli = std::move(cli);
    } catch (const net::NetError& e) {
      ctr_.login_failures.fetch_add(1, std::memory_order_relaxed);
      log::warn("fleet: assigned mec unreachable for agent %u (%s)", a.index, e.what());
      return false;
    }
    a.station_id = static_cast<uint32_t>(*vid_n);
    a.mec_id = std::string(*mec);
    a.mec_endpoint = std::string(*ep);
    a.logged_in = true;
    a.first_frame = true;
    a.old_cli.reset();
    a.delayed.clear();
    // Spread emissions across the period so the aggregate stream is smooth.
    a.next_due_ms = clock_.now_ms() + a.index % period_ms_;
    ctr_.logins.fetch_add(1, std::memory_order_relaxed);
    return true;
  }
  ctr_.login_failures.fetch_add(1, std::memory_order_relaxed);
  return false;
}

std::optional<cam::CamMessage> FleetRunner::render_fcd(Agent& a, uint64_t now_ms) {
  double elapsed_s = static_cast<double>(now_ms - fcd_t0_ms_) / 1000.0;
  double t0 = fcd_steps_.front().time_s;
  double t = t0 + elapsed_s;
  double last = fcd_steps_.back().time_s;
  if (t > last) {
    if (!cfg_.fcd->loop) return std::nullopt;  // replay finished
    double dt_step = fcd_steps_.size() >= 2 ? fcd_steps_[1].time_s - t0 : 1.0;
    double duration = last - t0 + dt_step;
    t = t0 + std::fmod(elapsed_s, duration);
  }
  auto it = std::upper_bound(fcd_steps_.begin(), fcd_steps_.end(), t,
                             [](double v, const fcd::FcdTimestep& s) { return v < s.time_s; });
  size_t idx = it == fcd_steps_.begin() ? 0 : static_cast<size_t>(it - fcd_steps_.begin()) - 1;
  const auto& step = fcd_steps_[idx];
  auto vit = std::find_if(step.vehicles.begin(), step.vehicles.end(),
                          [&](const fcd::FcdVehicle& v) { return v.name == fcd_names_[a.index]; });
  if (vit == step.vehicles.end()) return std::nullopt;  // not on the road this step

  cam::CamMessage m;
  m.station_id = a.station_id;
  m.gen_time_ms = now_ms;
  m.lat = vit->lat;
  m.lon = vit->lon;
  m.station_type = cfg_.station_type;
  m.heading_deg = normalize_heading(vit->heading_deg);
  m.speed_mps = vit->speed_mps;
  double dt_s = static_cast<double>(period_ms_) / 1000.0;
  m.accel_mps2 = a.first_frame ? 0.0 : (m.speed_mps - a.prev_speed) / dt_s;
  a.prev_speed = m.speed_mps;
  a.first_frame = false;
  return m;
}

void FleetRunner::publish_frame(Agent& a, const std::string& topic, const std::string& frame) {
  if (!a.cli) return;
  try {
    a.cli->publish(topic, frame);
    ctr_.frames.fetch_add(1, std::memory_order_relaxed);
    if (a.old_cli) {
      // Make-before-break completes on the first publish over the new path.
      try {
        a.old_cli->disconnect();
      } catch (const net::NetError&) {
      }
      a.old_cli.reset();
    }
  } catch (const net::NetError&) {
    a.cli.reset();
    a.logged_in = false;
    ctr_.reconnects.fetch_add(1, std::memory_order_relaxed);
  }
}

void FleetRunner::emit(Agent& a, uint64_t now_ms) {
  cam::CamMessage m;
  if (a.source) {
    m = a.source->next(static_cast<double>(period_ms_) / 1000.0, a.station_id, now_ms);
  } else {
    auto maybe = render_fcd(a, now_ms);
    if (!maybe) return;
    m = *maybe;
  }
  std::string topic;
  try {
    topic = a.mec_id + "/edm_feed/" + grid_.cell_of({m.lat, m.lon}).encode();
  } catch (const geo::OutOfProjectionDomain&) {
    return;  // grid misconfigured relative to the routes; nothing sensible to send
  }
  auto bytes = cam::encode_cam(m);
  std::string frame(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (cfg_.t_send_ms == 0) {
    publish_frame(a, topic, frame);
  } else {
    a.delayed.push_back({std::move(topic), std::move(frame), now_ms + cfg_.t_send_ms});
  }
}

void FleetRunner::apply_handover(Agent& a, std::string_view payload) {
  auto target = strings::kv_get(payload, "target");
  auto ep = strings::kv_get(payload, "endpoint");
  if (!target || !ep) return;
  if (*target == a.mec_id) {
    ctr_.handover_noops.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  bus::BrokerClient::Options opt;
  opt.timeout_ms = cfg_.io_timeout_ms;
  try {
    auto next = bus::BrokerClient::connect(net::Endpoint::parse(std::string(*ep)),
                                           "veh-" + std::to_string(a.station_id), opt);
    next.subscribe(std::string(*target) + "/handover/" + std::to_string(a.station_id));
    if (a.old_cli) {
      try {
        a.old_cli->disconnect();
      } catch (const net::NetError&) {
      }
    }
    a.old_cli = std::move(a.cli);
    a.cli = std::move(next);
    a.mec_id = std::string(*target);
    a.mec_endpoint = std::string(*ep);
    ctr_.handovers.fetch_add(1, std::memory_order_relaxed);
  } catch (const net::NetError& e) {
    // Unreachable target: keep the current assignment.
    ctr_.handover_failures.fetch_add(1, std::memory_order_relaxed);
    log::warn("fleet: handover target %s unreachable (%s)", std::string(*target).c_str(), e.what());
  }
}

void FleetRunner::drain_directives(Agent& a) {
  if (!a.cli) return;
  std::string handover_topic = a.mec_id + "/handover/" + std::to_string(a.station_id);
  try {
    while (auto d = a.cli->poll(0)) {
      if (d->topic == handover_topic) {
        apply_handover(a, d->payload);
        handover_topic = a.mec_id + "/handover/" + std::to_string(a.station_id);
      }
    }
  } catch (const net::NetError&) {
    a.cli.reset();
    a.old_cli.reset();
    a.logged_in = false;
    ctr_.reconnects.fetch_add(1, std::memory_order_relaxed);
  }
}

void FleetRunner::worker(std::stop_token st, size_t begin, size_t end) {
  std::vector<Agent> agents;
  agents.reserve(end - begin);
  for (size_t i = begin; i < end; ++i) {
    Agent a;
    a.index = static_cast<uint32_t>(i);
    if (cfg_.synthetic) a.source.emplace(*cfg_.synthetic, a.index, cfg_.station_type);
    agents.push_back(std::move(a));
  }

  std::optional<bus::BrokerClient> reg;
  uint64_t next_login_retry = 0;

  while (!st.stop_requested()) {
    uint64_t now = clock_.now_ms();

    bool pending_login = std::any_of(agents.begin(), agents.end(),
                                     [](const Agent& a) { return !a.logged_in; });
    if (pending_login && now >= next_login_retry) {
      try {
        if (!reg || !reg->connected()) {
          bus::BrokerClient::Options opt;
          opt.timeout_ms = cfg_.io_timeout_ms;
          reg = bus::BrokerClient::connect(cfg_.registry, "fleet-login-" + std::to_string(begin),
                                           opt);
        }
        bool all_ok = true;
        for (Agent& a : agents) {
          if (st.stop_requested()) return;
          if (!a.logged_in) all_ok = login(*reg, a) && all_ok;
        }
        if (!all_ok) next_login_retry = clock_.now_ms() + cfg_.retry_ms;
      } catch (const net::NetError& e) {
        reg.reset();
        log::warn("fleet: registry unreachable (%s), retrying", e.what());
        next_login_retry = clock_.now_ms() + cfg_.retry_ms;
      }
      now = clock_.now_ms();
    }

    uint64_t wake = now + 50;  // drain directives at least this often
    for (Agent& a : agents) {
      if (!a.logged_in) continue;
      if (now >= a.next_due_ms) {
        emit(a, now);
        // Catch up without bursts: skip periods the scheduler missed.
        while (a.next_due_ms <= now) a.next_due_ms += period_ms_;
      }
      while (!a.delayed.empty() && a.delayed.front().publish_at_ms <= now) {
        publish_frame(a, a.delayed.front().topic, a.delayed.front().frame);
        a.delayed.pop_front();
      }
      drain_directives(a);
      if (a.logged_in) wake = std::min(wake, a.next_due_ms);
      if (!a.delayed.empty()) wake = std::min(wake, a.delayed.front().publish_at_ms);
    }
    if (pending_login) wake = std::min(wake, std::max(next_login_retry, now + 1));

    clock_.wait_until(wake, st);
  }

  for (Agent& a : agents) {
    try {
      if (a.old_cli) a.old_cli->disconnect();
      if (a.cli) a.cli->disconnect();
    } catch (const net::NetError&) {
    }
  }
}

}  // namespace edm::fleet
