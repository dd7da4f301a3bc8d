#include "edm/registry.hpp"

#include <algorithm>
#include <fstream>

#include "edm/log.hpp"
#include "edm/strings.hpp"

namespace edm::registry {

bool RegistryCore::are_neighbours(const MecDescriptor& a, const MecDescriptor& b) {
  if (a.mec_id == b.mec_id) return false;
  return geo::haversine_m(a.pos, b.pos) < a.r_oper_m + b.r_oper_m;
}

const MecDescriptor& RegistryCore::best_mec(const geo::GeoPoint& p,
                                            const std::vector<MecDescriptor>& mecs) {
  if (mecs.empty()) throw NoMecAvailable("no MEC registered");
  const MecDescriptor* best_covered = nullptr;
  const MecDescriptor* best_any = nullptr;
  double d_covered = 0.0, d_any = 0.0;
  for (const MecDescriptor& m : mecs) {
    double d = geo::haversine_m(p, m.pos);
    auto better = [&](const MecDescriptor* cur, double cur_d) {
      return cur == nullptr || d < cur_d || (d == cur_d && m.mec_id < cur->mec_id);
    };
    if (better(best_any, d_any)) {
      best_any = &m;
      d_any = d;
    }
    if (d <= m.r_oper_m && better(best_covered, d_covered)) {
      best_covered = &m;
      d_covered = d;
    }
  }
  return best_covered ? *best_covered : *best_any;
}

std::map<std::string, std::vector<MecDescriptor>> RegistryCore::all_neighbour_lists() const {
  std::map<std::string, std::vector<MecDescriptor>> out;
  for (const auto& [id, d] : mecs_) {
    auto& list = out[id];
    for (const auto& [oid, other] : mecs_) {
      if (are_neighbours(d, other)) list.push_back(other);
    }
  }
  return out;
}

UpsertResult RegistryCore::upsert(const MecDescriptor& d, uint64_t now_ms, bool must_exist,
                                  bool always_notify_self) {
  auto it = mecs_.find(d.mec_id);
  if (must_exist && it == mecs_.end()) throw UnknownMec("unknown mec_id: " + d.mec_id);

  UpsertResult res;
  res.is_new = it == mecs_.end();
  res.changed = res.is_new || !(it->second == d);
  last_update_ms_[d.mec_id] = now_ms;
  if (!res.changed) {
    // Identical descriptor: a restarting MEC still needs its list to rebuild
    // border links, but nobody else's state moved.
    if (always_notify_self) res.notices.push_back({d.mec_id, neighbours_of(d.mec_id)});
    return res;
  }

  auto before = all_neighbour_lists();
  if (res.is_new) {
    mecs_.emplace(d.mec_id, d);
  } else {
    it->second = d;
  }
  auto after = all_neighbour_lists();

  // Notify every MEC whose neighbour list changed in membership or content
  // (a moved or resized neighbour needs fresh border cells).
  for (const auto& [id, list] : after) {
    auto b = before.find(id);
    bool list_changed = b == before.end() || b->second != list;
    if (list_changed || (always_notify_self && id == d.mec_id)) {
      res.notices.push_back({id, list});
    }
  }
  return res;
}

UpsertResult RegistryCore::register_mec(const MecDescriptor& d, uint64_t now_ms) {
  return upsert(d, now_ms, false, true);
}

UpsertResult RegistryCore::update_mec(const MecDescriptor& d, uint64_t now_ms) {
  return upsert(d, now_ms, true, false);
}

std::pair<uint32_t, MecDescriptor> RegistryCore::login_vehicle(const geo::GeoPoint& pos,
                                                               uint64_t now_ms) {
  std::vector<MecDescriptor> all = mecs();
  const MecDescriptor& assigned = best_mec(pos, all);  // throws NoMecAvailable
  VehicleRecord rec;
  rec.vehicle_id = next_vehicle_id_++;
  rec.login_pos = pos;
  rec.assigned_mec = assigned.mec_id;
  rec.login_ms = now_ms;
  vehicles_.push_back(rec);
  return {rec.vehicle_id, assigned};
}

const MecDescriptor* RegistryCore::find(const std::string& mec_id) const {
  auto it = mecs_.find(mec_id);
  return it == mecs_.end() ? nullptr : &it->second;
}

std::vector<MecDescriptor> RegistryCore::mecs() const {
  std::vector<MecDescriptor> out;
  out.reserve(mecs_.size());
  for (const auto& [_, d] : mecs_) out.push_back(d);
  return out;
}

std::vector<MecDescriptor> RegistryCore::neighbours_of(const std::string& mec_id) const {
  std::vector<MecDescriptor> out;
  auto it = mecs_.find(mec_id);
  if (it == mecs_.end()) return out;
  for (const auto& [_, other] : mecs_) {
    if (are_neighbours(it->second, other)) out.push_back(other);
  }
  return out;
}

std::string RegistryCore::to_csv() const {
  std::string out = "# edm registry snapshot\n";
  out += "# next_vehicle_id=" + std::to_string(next_vehicle_id_) + "\n";
  for (const auto& [_, d] : mecs_) {
    out += "mec," + d.to_line() + "\n";
  }
  for (const VehicleRecord& v : vehicles_) {
    out += "vehicle," + std::to_string(v.vehicle_id) + "," +
           strings::format_double(v.login_pos.lat, 7) + "," +
           strings::format_double(v.login_pos.lon, 7) + "," + v.assigned_mec + "," +
           std::to_string(v.login_ms) + "\n";
  }
  return out;
}

RegistryCore RegistryCore::from_csv(std::string_view text) {
  RegistryCore core;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? nl : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    if (line.empty()) continue;
    if (strings::starts_with(line, "# next_vehicle_id=")) {
      auto v = strings::to_u64(line.substr(18));
      if (!v || *v == 0 || *v > UINT32_MAX) throw InvalidDescriptor("bad next_vehicle_id");
      core.next_vehicle_id_ = static_cast<uint32_t>(*v);
      continue;
    }
    if (line[0] == '#') continue;
    if (strings::starts_with(line, "mec,")) {
      auto d = MecDescriptor::parse_line(line.substr(4));
      if (!d) throw InvalidDescriptor("bad mec line: " + std::string(line));
      core.mecs_.emplace(d->mec_id, *d);
      continue;
    }
    if (strings::starts_with(line, "vehicle,")) {
      auto f = strings::split(line.substr(8), ',');
      if (f.size() != 5) throw InvalidDescriptor("bad vehicle line");
      auto id = strings::to_u64(f[0]);
      auto lat = strings::to_double(f[1]);
      auto lon = strings::to_double(f[2]);
      auto ms = strings::to_u64(f[4]);
      if (!id || !lat || !lon || !ms) throw InvalidDescriptor("bad vehicle line");
      VehicleRecord rec;
      rec.vehicle_id = static_cast<uint32_t>(*id);
      rec.login_pos = {*lat, *lon};
      rec.assigned_mec = std::string(f[3]);
      rec.login_ms = *ms;
      core.vehicles_.push_back(rec);
      continue;
    }
    throw InvalidDescriptor("unrecognized snapshot line: " + std::string(line));
  }
  return core;
}

RegistryServer::RegistryServer(RegistryServerConfig cfg, Clock& clock)
    : cfg_(std::move(cfg)),
      clock_(clock),
      broker_(bus::BrokerConfig{cfg_.listen, cfg_.max_payload, 10'000}) {}

RegistryServer::~RegistryServer() { stop(); }

void RegistryServer::start() {
  if (running_) return;
  if (!cfg_.snapshot_path.empty()) {
    std::ifstream in(cfg_.snapshot_path);
    if (in) {
      std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      try {
        core_ = RegistryCore::from_csv(text);
        log::info("registry: restored %zu mecs, %zu vehicles from %s", core_.mecs().size(),
                  core_.vehicles().size(), cfg_.snapshot_path.c_str());
      } catch (const InvalidDescriptor& e) {
        log::warn("registry: ignoring unreadable snapshot %s: %s", cfg_.snapshot_path.c_str(),
                  e.what());
      }
    }
  }

  broker_.start();
  broker_.internal_subscribe(cfg_.registry_id + "-mec-login", {cfg_.registry_id + "/mec/login"},
                             [this](std::string_view, std::string_view p) { on_mec_login(p); });
  broker_.internal_subscribe(cfg_.registry_id + "-veh-login", {cfg_.registry_id + "/vehicle/login"},
                             [this](std::string_view, std::string_view p) { on_vehicle_login(p); });
  running_ = true;
  if (!cfg_.snapshot_path.empty()) {
    snapshot_thread_ = std::jthread([this](std::stop_token st) {
      while (!st.stop_requested()) {
        clock_.wait_for(cfg_.snapshot_every_ms, st);
        if (st.stop_requested()) break;
        write_snapshot();
      }
    });
  }
}

void RegistryServer::stop() {
  if (!running_) return;
  if (snapshot_thread_.joinable()) {
    snapshot_thread_.request_stop();
    snapshot_thread_.join();
  }
  if (!cfg_.snapshot_path.empty()) write_snapshot();
  broker_.stop();
  running_ = false;
}

net::Endpoint RegistryServer::endpoint() const { return broker_.endpoint(); }

void RegistryServer::write_snapshot() {
  std::string text;
  {
    std::lock_guard lock(mu_);
    text = core_.to_csv();
  }
  std::string tmp = cfg_.snapshot_path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) {
      log::error("registry: cannot write snapshot %s", tmp.c_str());
      return;
    }
    out << text;
  }
  if (std::rename(tmp.c_str(), cfg_.snapshot_path.c_str()) != 0) {
    log::error("registry: cannot replace snapshot %s", cfg_.snapshot_path.c_str());
  }
}

void RegistryServer::publish_notices(const std::vector<Notice>& notices) {
  for (const Notice& n : notices) {
    std::string payload;
    for (const MecDescriptor& d : n.neighbours) {
      payload += d.to_line();
      payload += '\n';
    }
    broker_.publish("mec_registry/neighbours/" + n.mec_id, payload);
  }
}

void RegistryServer::on_mec_login(std::string_view payload) {
  auto d = MecDescriptor::parse_line(payload);
  if (!d) {
    log::warn("registry: dropping malformed mec login: %.*s", static_cast<int>(payload.size()),
              payload.data());
    return;
  }
  UpsertResult res;
  {
    std::lock_guard lock(mu_);
    res = core_.register_mec(*d, clock_.now_ms());
  }
  log::info("registry: mec %s %s, %zu notice(s)", d->mec_id.c_str(),
            res.is_new ? "registered" : (res.changed ? "updated" : "refreshed"),
            res.notices.size());
  if (res.changed) {
    broker_.publish("mec_registry/update/" + d->mec_id, d->to_line());
  }
  publish_notices(res.notices);
}

void RegistryServer::on_vehicle_login(std::string_view payload) {
  cam::CamMessage m;
  try {
    m = cam::decode_cam_raw(
        std::span<const uint8_t>(reinterpret_cast<const uint8_t*>(payload.data()), payload.size()));
  } catch (const cam::CodecError& e) {
    log::warn("registry: dropping malformed vehicle login: %s", e.what());
    return;
  }
  uint32_t nonce = m.station_id;
  uint32_t vid;
  MecDescriptor assigned;
  try {
    std::lock_guard lock(mu_);
    auto [v, a] = core_.login_vehicle({m.lat, m.lon}, clock_.now_ms());
    vid = v;
    assigned = a;
  } catch (const NoMecAvailable&) {
    log::warn("registry: vehicle login with no MEC registered");
    broker_.publish(cfg_.registry_id + "/login_response/" + std::to_string(nonce),
                    "error=no_mec_available");
    return;
  }
  // The response topic carries the nonce the vehicle chose; the payload
  // carries the assigned id it will use from now on.
  broker_.publish(cfg_.registry_id + "/login_response/" + std::to_string(nonce),
                  "vehicle_id=" + std::to_string(vid) + ";mec_id=" + assigned.mec_id +
                      ";endpoint=" + assigned.endpoint);
}

}  // namespace edm::registry
