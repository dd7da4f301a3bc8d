#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "edm/cam.hpp"
#include "edm/hexgrid.hpp"

namespace edm::store {

// One row of the EDM: a received CAM plus the insertion-batch timestamp.
// ts_ms >= gen_time_ms is not required; sender clock skew is tolerated.
struct StoredPoint {
  uint32_t station_id = 0;
  uint64_t ts_ms = 0;
  uint64_t gen_time_ms = 0;
  double lat = 0.0;
  double lon = 0.0;
  cam::StationType station_type = cam::StationType::car;
  double heading_deg = 0.0;
  double speed_mps = 0.0;
  double accel_mps2 = 0.0;
  geo::CellId cell;
};

StoredPoint from_cam(const cam::CamMessage& m, uint64_t ts_ms);

struct RetentionConfig {
  uint64_t window_ms = 60'000;
  uint64_t prune_interval_ms = 1'000;

  void validate() const;  // throws std::invalid_argument
};

enum class QueryMode { latest_per_vehicle, all_points };

struct Region {
  enum class Kind { none, bbox, cell };
  Kind kind = Kind::none;
  double lat_min = 0.0, lat_max = 0.0;
  double lon_min = 0.0, lon_max = 0.0;
  geo::CellId cell;

  static Region none() { return {}; }
  static Region bbox(double lat_min, double lat_max, double lon_min, double lon_max);
  static Region in_cell(const geo::CellId& c);

  bool contains(const StoredPoint& p) const;
};

// The five query shapes:
//   Q1 latest_per_vehicle + bbox      Q2 latest_per_vehicle + cell
//   Q3 all_points + window            Q4 all_points + window + bbox
//   Q5 all_points + window + cell
struct QuerySpec {
  QueryMode mode = QueryMode::all_points;
  std::optional<uint64_t> time_window_ms;  // rows with ts_ms >= now_ms - window
  Region region;

  void validate() const;  // throws InvalidSpec
};

struct InvalidSpec : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CapacityExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InsertReport {
  size_t count = 0;
  double t_insertion_ms = 0.0;
};

struct StoreConfig {
  size_t max_rows = 2'000'000;
  // Working-set budget analog; recorded in bench metadata, no other semantics.
  size_t memory_budget_bytes = 1 << 20;
};

struct StoreMetrics {
  double last_insert_ms = 0.0;
  size_t last_batch_size = 0;
  size_t rows_live = 0;
  size_t memory_budget_bytes = 0;
};

// In-memory time-series store. Layout: append-only segments, one per insert
// batch, all rows of a segment sharing ts_ms; per-segment cell postings. The
// time-window predicate is therefore a segment-level skip, and cell queries
// touch only postings, which realizes the Q5 < Q4 and Q2 < Q1 cost ordering
// structurally.
//
// Concurrency: one writer (insert_batch/prune), many readers; queries run on
// an immutable snapshot and never observe a partial batch.
class EdmStore {
 public:
  explicit EdmStore(StoreConfig cfg = {});

  // All points get ts_ms = now_ms. Throws CapacityExceeded and leaves the
  // store unchanged if the batch would exceed max_rows.
  InsertReport insert_batch(std::vector<StoredPoint> points, uint64_t now_ms);

  std::vector<StoredPoint> query(const QuerySpec& spec, uint64_t now_ms) const;

  // Removes exactly the rows with ts_ms < now_ms - window. Exact because all
  // rows of a segment share one ts_ms.
  size_t prune(uint64_t now_ms, const RetentionConfig& cfg);

  size_t rows_live() const;
  StoreMetrics metrics() const;
  const StoreConfig& config() const { return cfg_; }

 private:
  struct Segment {
    uint64_t ts_ms = 0;
    std::vector<StoredPoint> rows;  // insertion order
    std::unordered_map<geo::CellId, std::vector<uint32_t>, geo::CellIdHash> by_cell;
  };
  using SegmentPtr = std::shared_ptr<const Segment>;

  std::vector<SegmentPtr> snapshot() const;

  StoreConfig cfg_;
  mutable std::shared_mutex mu_;
  std::deque<SegmentPtr> segments_;  // insertion order; ts_ms non-decreasing in practice
  size_t rows_live_ = 0;
  double last_insert_ms_ = 0.0;
  size_t last_batch_size_ = 0;
};

}  // namespace edm::store
