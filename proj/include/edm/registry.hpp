#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "edm/broker.hpp"
#include "edm/cam.hpp"
#include "edm/clock.hpp"
#include "edm/descriptor.hpp"

namespace edm::registry {

struct InvalidDescriptor : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownMec : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoMecAvailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VehicleRecord {
  uint32_t vehicle_id = 0;
  geo::GeoPoint login_pos;
  std::string assigned_mec;
  uint64_t login_ms = 0;
};

// One neighbour-list publication: the full fresh list for one MEC.
struct Notice {
  std::string mec_id;
  std::vector<MecDescriptor> neighbours;
};

struct UpsertResult {
  bool is_new = false;
  bool changed = false;           // descriptor differed from the stored one
  std::vector<Notice> notices;    // every MEC whose neighbour list changed
};

// Pure registry state machine: MEC map, neighbour relation, vehicle numbering.
// No I/O, no locking; RegistryServer wraps it.
class RegistryCore {
 public:
  // Two MECs are neighbours iff their operating discs intersect:
  // dist < r_oper_a + r_oper_b.
  static bool are_neighbours(const MecDescriptor& a, const MecDescriptor& b);

  // Covered-then-nearest: among MECs whose operating disc contains p (dist
  // <= r_oper), the nearest, ties by smaller mec_id; if none covers p, the
  // globally nearest with the same tie rule.
  static const MecDescriptor& best_mec(const geo::GeoPoint& p,
                                       const std::vector<MecDescriptor>& mecs);

  // Insert or update via login. The registering MEC always gets its own list
  // (even empty, even on an identical re-login); others only when their list
  // changed.
  UpsertResult register_mec(const MecDescriptor& d, uint64_t now_ms);
  // Strictly idempotent update: an identical descriptor produces zero
  // notices. Throws UnknownMec if absent.
  UpsertResult update_mec(const MecDescriptor& d, uint64_t now_ms);

  // Assigns the next vehicle id and records the login. Throws NoMecAvailable.
  std::pair<uint32_t, MecDescriptor> login_vehicle(const geo::GeoPoint& pos, uint64_t now_ms);

  const MecDescriptor* find(const std::string& mec_id) const;
  std::vector<MecDescriptor> mecs() const;
  std::vector<MecDescriptor> neighbours_of(const std::string& mec_id) const;
  const std::vector<VehicleRecord>& vehicles() const { return vehicles_; }
  uint32_t next_vehicle_id() const { return next_vehicle_id_; }

  std::string to_csv() const;
  static RegistryCore from_csv(std::string_view text);  // throws InvalidDescriptor

 private:
  UpsertResult upsert(const MecDescriptor& d, uint64_t now_ms, bool must_exist,
                      bool always_notify_self);
  std::map<std::string, std::vector<MecDescriptor>> all_neighbour_lists() const;

  std::map<std::string, MecDescriptor> mecs_;  // ordered: deterministic snapshots
  std::map<std::string, uint64_t> last_update_ms_;
  std::vector<VehicleRecord> vehicles_;
  uint32_t next_vehicle_id_ = 1;
};

struct RegistryServerConfig {
  net::Endpoint listen{"127.0.0.1", 0};
  std::string registry_id = "mec_registry_id";  // topic prefix for login traffic
  size_t max_payload = bus::kDefaultMaxPayload;
  std::string snapshot_path;  // empty disables snapshots
  uint64_t snapshot_every_ms = 5'000;
};

// The registry service: its own broker plus the core, wired to the login
// topics. MEC login payloads are descriptor CSV lines; vehicle logins are raw
// CAM frames whose station_id is a caller-chosen nonce, echoed back as the
// response topic's last segment.
class RegistryServer {
 public:
  RegistryServer(RegistryServerConfig cfg, Clock& clock);
  ~RegistryServer();

  void start();
  void stop();
  net::Endpoint endpoint() const;  // broker address

  bus::BrokerServer& broker() { return broker_; }

  // Test/tooling access; serialized with the message handlers.
  template <typename F>
  auto with_core(F&& f) {
    std::lock_guard lock(mu_);
    return f(core_);
  }

  void write_snapshot();  // immediate, also called periodically and on stop

 private:
  void on_mec_login(std::string_view payload);
  void on_vehicle_login(std::string_view payload);
  void publish_notices(const std::vector<Notice>& notices);

  RegistryServerConfig cfg_;
  Clock& clock_;
  bus::BrokerServer broker_;
  std::mutex mu_;
  RegistryCore core_;
  std::jthread snapshot_thread_;
  bool running_ = false;
};

}  // namespace edm::registry
