#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "edm/broker_client.hpp"
#include "edm/cam.hpp"
#include "edm/clock.hpp"
#include "edm/fcd.hpp"
#include "edm/hexgrid.hpp"
#include "edm/net.hpp"

namespace edm::fleet {

// Synthetic traffic: random-waypoint inside a bbox, constant speed per leg,
// fully determined by (seed, vehicle index).
struct SyntheticModel {
  double lat_min = 52.48;
  double lat_max = 52.56;
  double lon_min = 13.36;
  double lon_max = 13.45;
  size_t n_vehicles = 1;
  uint64_t seed = 1;
  double speed_min_mps = 5.0;
  double speed_max_mps = 20.0;

  void validate() const;  // throws std::invalid_argument
};

struct FcdModel {
  std::string path;
  bool loop = false;
};

// Deterministic uniform source. mt19937_64 has a fully specified output
// sequence, and the mapping to doubles is pinned here, so identical seeds
// give identical trajectories on any platform.
class DetRng {
 public:
  DetRng(uint64_t seed, uint64_t stream)
      : eng_(seed ^ (0x9e3779b97f4a7c15ull * (stream + 0x2545f4914f6cdd1dull))) {}

  uint64_t bits() { return eng_(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * ((bits() >> 11) * 0x1.0p-53); }

 private:
  std::mt19937_64 eng_;
};

// Random-waypoint motion on a local planar approximation anchored at the
// bbox center. Constant speed per leg; heading follows the leg.
class Trajectory {
 public:
  Trajectory(const SyntheticModel& m, uint32_t index);

  void advance(double dt_s);
  const geo::GeoPoint& position() const { return pos_; }
  double heading_deg() const { return heading_; }
  double speed_mps() const { return speed_; }

 private:
  void pick_leg();

  SyntheticModel m_;
  DetRng rng_;
  geo::GeoPoint pos_;
  geo::GeoPoint target_;
  double speed_ = 0.0;
  double heading_ = 0.0;
  double m_per_deg_lat_;
  double m_per_deg_lon_;
};

// One vehicle's deterministic CAM stream: advances the trajectory one send
// period at a time and renders the frame, with acceleration derived by
// finite difference of consecutive speeds.
class SyntheticSource {
 public:
  SyntheticSource(const SyntheticModel& m, uint32_t index,
                  cam::StationType type = cam::StationType::car)
      : traj_(m, index), type_(type) {}

  const geo::GeoPoint& position() const { return traj_.position(); }
  double speed_mps() const { return traj_.speed_mps(); }

  cam::CamMessage next(double dt_s, uint32_t station_id, uint64_t gen_time_ms);

 private:
  Trajectory traj_;
  cam::StationType type_;
  double prev_speed_ = 0.0;
  bool first_ = true;
};

struct FleetConfig {
  net::Endpoint registry;
  std::string registry_id = "mec_registry_id";
  geo::HexGridConfig grid;        // must match the MEC deployment
  double rate_hz = 10.0;          // ETSI band [1, 10]
  uint64_t t_send_ms = 0;         // artificial uplink delay before publish
  size_t workers = 4;
  cam::StationType station_type = cam::StationType::car;
  int io_timeout_ms = 2'000;      // login waits, broker handshakes
  uint64_t retry_ms = 500;        // backoff after registry/broker failures

  std::optional<SyntheticModel> synthetic;
  std::optional<FcdModel> fcd;

  void validate() const;  // throws std::invalid_argument
};

struct FleetCounters {
  uint64_t logins = 0;            // successful registry logins
  uint64_t login_failures = 0;    // error responses and timeouts
  uint64_t frames = 0;            // CAM frames published to a feed
  uint64_t handovers = 0;         // directives applied
  uint64_t handover_noops = 0;    // directives naming the current MEC
  uint64_t handover_failures = 0; // unreachable targets, assignment kept
  uint64_t reconnects = 0;        // data connection lost, went back to login
};

// Drives the fleet: per-vehicle login through the registry, periodic CAM
// publication to `<assigned_mec>/edm_feed/<cell>`, and make-before-break
// handover on `<mec>/handover/<station>` directives. Agents are partitioned
// across a few worker threads; each agent keeps its own broker connection.
class FleetRunner {
 public:
  FleetRunner(FleetConfig cfg, Clock& clock);
  ~FleetRunner();

  void start();
  void stop();

  FleetCounters counters() const;
  size_t size() const { return n_agents_; }

 private:
  struct Pending {
    std::string topic;
    std::string frame;
    uint64_t publish_at_ms;
  };
  struct Agent {
    uint32_t index = 0;
    std::optional<SyntheticSource> source;       // synthetic mode
    size_t fcd_vehicle = 0;                      // index into the replay table
    uint32_t station_id = 0;
    std::string mec_id;
    std::string mec_endpoint;
    std::optional<bus::BrokerClient> cli;        // current data connection
    std::optional<bus::BrokerClient> old_cli;    // closed after the first publish post-handover
    bool logged_in = false;
    uint64_t next_due_ms = 0;
    double prev_speed = 0.0;
    bool first_frame = true;
    std::deque<Pending> delayed;                 // non-empty only with t_send > 0
  };

  void worker(std::stop_token st, size_t begin, size_t end);
  bool login(bus::BrokerClient& reg, Agent& a);
  void emit(Agent& a, uint64_t now_ms);
  void publish_frame(Agent& a, const std::string& topic, const std::string& frame);
  void drain_directives(Agent& a);
  void apply_handover(Agent& a, std::string_view payload);
  std::optional<cam::CamMessage> render_fcd(Agent& a, uint64_t now_ms);

  FleetConfig cfg_;
  Clock& clock_;
  geo::HexGrid grid_;
  uint64_t period_ms_;
  size_t n_agents_ = 0;

  // FCD replay table, shared read-only across workers after start().
  std::vector<fcd::FcdTimestep> fcd_steps_;
  std::vector<std::string> fcd_names_;           // agent -> vehicle name
  uint64_t fcd_t0_ms_ = 0;                       // wall time of timestep 0

  struct AtomicCounters {
    std::atomic<uint64_t> logins{0}, login_failures{0}, frames{0}, handovers{0},
        handover_noops{0}, handover_failures{0}, reconnects{0};
  };
  AtomicCounters ctr_;

  std::vector<std::jthread> threads_;
  bool running_ = false;
};

}  // namespace edm::fleet
