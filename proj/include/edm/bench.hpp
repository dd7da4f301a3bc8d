#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edm/fleet.hpp"
#include "edm/hexgrid.hpp"
#include "edm/mec.hpp"
#include "edm/store.hpp"

namespace edm::bench {

// Latency sample summary. Percentiles are nearest-rank over the sorted
// samples, std uses the n-1 denominator, and the CDF has one point per
// sample, ending at fraction 1.0.
struct LatencyStats {
  size_t n = 0;
  double mean_ms = 0.0;
  double std_ms = 0.0;
  double p50_ms = 0.0;
  double p90_ms = 0.0;
  double p99_ms = 0.0;
  std::vector<std::pair<double, double>> cdf;  // (latency_ms, cumulative fraction)
};

struct EmptySamples : std::runtime_error {
  using std::runtime_error::runtime_error;
};

LatencyStats summarize(std::vector<double> samples_ms);  // throws EmptySamples

struct BenchConfig {
  std::vector<size_t> batch_sizes{100, 1000, 2500, 5000, 10000};
  size_t repetitions = 1000;  // >= 30 so the std column means something
  size_t n_cells = 20;
  size_t memory_budget_bytes = 1 << 20;
  uint64_t seed = 1;
  geo::HexGridConfig grid;

  void validate() const;  // throws std::invalid_argument
};

// The first n cells of the deployment, ring by ring outward from the origin
// cell; stations are dealt onto these round-robin.
std::vector<geo::CellId> bench_cells(size_t n);

// Encoded frames for one repetition: stations 1..batch, station i pinned to
// cell[i % n_cells], position jittered within half an apothem of the center
// so the assignment survives re-indexing on decode. Deterministic in
// (batch, n_cells, seed).
std::vector<mec::BufferedFrame> build_corpus(const geo::HexGrid& grid, size_t batch,
                                             size_t n_cells, uint64_t seed,
                                             uint64_t gen_time_ms);

struct InsertionResult {
  size_t batch_size = 0;
  LatencyStats decode;
  LatencyStats insertion;
  LatencyStats total;    // decode + insertion per repetition
  bool realtime = true;  // mean total under the 50 ms flush budget
};

// Decode/insert cost per batch size, measured through the exact flush path
// (decode_batch, then EdmStore::insert_batch). Fresh store per batch size;
// repetitions walk a virtual timeline with retention pruning so the store
// holds a steady-state working set rather than growing without bound.
std::vector<InsertionResult> run_insertion_bench(const BenchConfig& cfg);

// The five query shapes in QuerySpec order: latest+bbox, latest+cell,
// window, window+bbox, window+cell.
struct QueryResult {
  size_t batch_size = 0;
  std::array<LatencyStats, 5> q;
};

// Per repetition: insert one corpus batch, then time each of the five query
// shapes. The window is max(100 ms, that repetition's insertion time); the
// bbox bounds cell[0], the cell filter is cell[0].
std::vector<QueryResult> run_query_bench(const BenchConfig& cfg);

struct CapacityConfig {
  size_t n_vehicles = 2000;
  double rate_hz = 10.0;
  uint64_t t_buffer_ms = 50;
  uint64_t duration_s = 60;
  uint64_t t_send_ms = 0;
  uint64_t seed = 1;
  size_t fleet_workers = 4;
  fleet::SyntheticModel area;   // bbox only; n_vehicles/seed above win
  geo::HexGridConfig grid;      // origin 0,0 = auto: bbox center
  double probe_hz = 20.0;       // tagged-frame rate
  uint64_t probe_poll_ms = 25;  // window-query polling period
  uint64_t login_wait_ms = 30'000;

  void validate() const;  // throws std::invalid_argument
};

// Full-stack load report. Asserts nothing; the numbers feed the acceptance
// gates.
struct CapacityReport {
  size_t n_vehicles = 0;
  double rate_hz = 0.0;
  uint64_t t_buffer_ms = 0;
  uint64_t duration_s = 0;
  uint64_t logins = 0;
  uint64_t frames_sent = 0;      // fleet publishes
  uint64_t frames_stored = 0;    // rows inserted by the MEC
  uint64_t buffer_drops = 0;     // MEC dropped counter (buffer + store capacity)
  uint64_t malformed = 0;
  uint64_t flushes = 0;
  uint64_t budget_violations = 0;
  double budget_ok_fraction = 1.0;
  bool saturated = false;  // any flush blew the decode+insert budget
  LatencyStats availability;  // first-visible minus generation time, tagged frames
  uint64_t probe_sent = 0;
  uint64_t probe_lost = 0;  // tagged frames that never became visible
};

// Boots registry + one MEC + synthetic fleet in-process on loopback, runs
// for duration_s, and measures per-frame availability with a probe station
// that publishes sequence-tagged frames and polls the window query for them.
CapacityReport run_capacity_bench(const CapacityConfig& cfg);

// ---- CSV emitters ----
//
// Schemas are documented in docs/bench.md. Files start with '#' metadata
// lines recording the run parameters so outputs are comparable.

std::string render_cdf_csv(const LatencyStats& s);
std::string render_insertion_csv(const std::vector<InsertionResult>& rows, const BenchConfig& cfg);
std::string render_query_csv(const std::vector<QueryResult>& rows, const BenchConfig& cfg);
std::string render_capacity_csv(const CapacityReport& r);

// Writes table + CDF files under dir (created if absent). Returns the list
// of paths written, table first.
std::vector<std::string> write_insertion_outputs(const std::vector<InsertionResult>& rows,
                                                 const BenchConfig& cfg, const std::string& dir);
std::vector<std::string> write_query_outputs(const std::vector<QueryResult>& rows,
                                             const BenchConfig& cfg, const std::string& dir);
std::vector<std::string> write_capacity_outputs(const CapacityReport& r, const std::string& dir);

}  // namespace edm::bench
