#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "edm/broker.hpp"
#include "edm/broker_client.hpp"
#include "edm/cam.hpp"
#include "edm/clock.hpp"
#include "edm/descriptor.hpp"
#include "edm/store.hpp"

namespace edm::mec {

// ---- ITS query payload and response ----
//
// Query payload: `mode=<latest|all>;window_ms=<n|none>;region=<none|bbox:lat_min,lat_max,lon_min,lon_max|cell:ID>`
// Response payload: CSV with header
//   station_id,ts_ms,gen_time_ms,lat,lon,type,heading,speed,accel,cell
// Errors come back as a single line `error=<message>` (never a CSV header).

std::optional<store::QuerySpec> parse_its_query(std::string_view payload);
std::string render_response_csv(const std::vector<store::StoredPoint>& rows);
// Parses a response payload; returns nullopt on `error=` responses or a
// malformed body.
std::optional<std::vector<store::StoredPoint>> parse_response_csv(std::string_view csv);

// ---- pure pieces of the server, unit-testable in isolation ----

struct HandoverConfig {
  double margin_m = 25.0;
  uint64_t cooldown_ms = 5'000;
};

struct HandoverDirective {
  std::string target_mec;
  std::string endpoint;
};

// Hysteresis handover rule. Owned by the flush worker; not thread-safe.
// A directive for station v is issued iff
//   dist(p, self) > self.r_opt + margin
//   and some neighbour n has dist(p, n) < n.r_opt - margin
//   and v's previous directive is older than the cooldown;
// the target is the qualifying neighbour nearest to p (ties: smaller id).
class HandoverTracker {
 public:
  explicit HandoverTracker(HandoverConfig cfg = {}) : cfg_(cfg) {}

  std::optional<HandoverDirective> evaluate(uint32_t station, const geo::GeoPoint& p,
                                            const MecDescriptor& self,
                                            std::span<const MecDescriptor> neighbours,
                                            uint64_t now_ms);

  const HandoverConfig& config() const { return cfg_; }

 private:
  HandoverConfig cfg_;
  std::unordered_map<uint32_t, uint64_t> last_handover_ms_;
};

// Cells whose centers lie in both operating discs; sorted. These are the
// feeds mirrored from a neighbour's broker.
std::vector<geo::CellId> border_cells(const MecDescriptor& self, const MecDescriptor& n,
                                      const geo::HexGrid& grid);

// One raw frame waiting in the double buffer.
struct BufferedFrame {
  std::string bytes;
  uint64_t arrival_ms = 0;
  bool mirrored = false;  // arrived over a border link, TTL 1: never re-forwarded
};

struct DecodeOutcome {
  std::vector<store::StoredPoint> points;   // cell recomputed under the local grid
  std::vector<uint32_t> source_index;       // frame index behind each point
  size_t malformed = 0;
  double t_decode_ms = 0.0;
};

// The decode half of a flush; bench_cli measures insertion through this exact
// path.
DecodeOutcome decode_batch(std::span<const BufferedFrame> frames, const geo::HexGrid& grid);

struct FlushReport {
  size_t count = 0;
  double t_decode_ms = 0.0;
  double t_insertion_ms = 0.0;
  bool budget_ok = true;  // t_decode + t_insertion < t_buffer
};

struct MecCounters {
  uint64_t accepted = 0;         // frames admitted to the active buffer
  uint64_t dropped = 0;          // buffer-overflow and store-capacity losses
  uint64_t malformed = 0;        // frames that failed to decode during flush
  uint64_t stored = 0;           // rows inserted
  uint64_t mirrored = 0;         // subset of accepted that arrived via border links
  uint64_t flushes = 0;
  uint64_t budget_violations = 0;
  uint64_t handovers = 0;
  uint64_t queries = 0;
  uint64_t query_errors = 0;
};

struct MecConfig {
  std::string mec_id = "mec1";
  geo::GeoPoint pos;
  double r_opt_m = 500.0;
  double r_oper_m = 800.0;
  net::Endpoint listen{"127.0.0.1", 0};  // own broker; port 0 = ephemeral
  std::optional<net::Endpoint> registry;  // none = standalone (tests)
  std::string registry_id = "mec_registry_id";
  uint64_t t_buffer_ms = 50;
  store::RetentionConfig retention;
  store::StoreConfig store_cfg;
  geo::HexGridConfig grid;
  HandoverConfig handover;
  size_t active_limit = 100'000;
  size_t query_queue_limit = 1024;
  uint64_t metrics_every_ms = 1'000;
  int registry_retry_ms = 500;  // backoff between registry connection attempts
};

// The MEC server: embedded broker, double-buffered CAM ingest, flush/prune
// scheduler, ITS query answering, hysteresis handover, border-cell mirroring.
class MecServer {
 public:
  MecServer(MecConfig cfg, Clock& clock);
  ~MecServer();

  void start();
  void stop();

  net::Endpoint endpoint() const;  // own broker address
  MecDescriptor descriptor() const;

  bus::BrokerServer& broker() { return broker_; }
  const store::EdmStore& store() const { return store_; }
  const geo::HexGrid& grid() const { return *grid_; }

  // Ingest path; also called by the broker callbacks. O(1), never blocks on
  // a flush. Returns false when the active buffer is full (frame dropped).
  bool ingest_cam(std::string_view raw, bool mirrored);

  // Runs one flush now (swap, decode, insert, handover). The scheduler calls
  // this every t_buffer_ms; tests may call it directly when constructed
  // without start().
  FlushReport flush_now();

  MecCounters counters() const;
  FlushReport last_flush() const;
  std::vector<MecDescriptor> neighbours() const;

 private:
  struct QueryJob {
    std::string app_id;
    std::string vehicle_id;
    std::string payload;
  };
  struct BorderLink;

  void flush_worker(std::stop_token st);
  void query_worker(std::stop_token st);
  void registry_worker(std::stop_token st);
  void border_worker(std::stop_token st, BorderLink* link);
  void on_query(std::string_view topic, std::string_view payload);
  void apply_neighbour_list(std::string_view payload);
  void answer(const QueryJob& job);

  MecConfig cfg_;
  Clock& clock_;
  bus::BrokerServer broker_;
  std::unique_ptr<geo::HexGrid> grid_;
  store::EdmStore store_;
  HandoverTracker handover_;  // flush-worker state

  mutable std::mutex ingest_mu_;
  std::vector<BufferedFrame> active_;
  std::vector<BufferedFrame> flushing_;

  struct AtomicCounters {
    std::atomic<uint64_t> accepted{0}, dropped{0}, malformed{0}, stored{0}, mirrored{0},
        flushes{0}, budget_violations{0}, handovers{0}, queries{0}, query_errors{0};
  };
  AtomicCounters ctr_;

  mutable std::mutex state_mu_;  // last flush report, neighbour list
  FlushReport last_flush_;
  std::vector<MecDescriptor> neighbours_;

  std::mutex query_mu_;
  std::condition_variable_any query_cv_;
  std::deque<QueryJob> query_q_;

  // Border links keyed by neighbour id; each owns a client thread connected
  // to that neighbour's broker. The jthread is the last member so its dtor
  // joins before the data the worker reads is destroyed.
  struct BorderLink {
    MecDescriptor neighbour;
    std::vector<geo::CellId> cells;
    uint64_t generation = 1;  // bumped when the descriptor/cell set changes
    std::jthread thread;
  };
  std::mutex border_mu_;
  std::unordered_map<std::string, std::shared_ptr<BorderLink>> borders_;
  std::vector<std::shared_ptr<BorderLink>> border_graveyard_;  // joined at stop

  std::jthread flush_thread_;
  std::jthread query_thread_;
  std::jthread registry_thread_;
  bool running_ = false;
};

}  // namespace edm::mec
