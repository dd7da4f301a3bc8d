#include "edm/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include "edm/broker_client.hpp"
#include "edm/clock.hpp"
#include "edm/log.hpp"
#include "edm/registry.hpp"
#include "edm/strings.hpp"

namespace edm::bench {

LatencyStats summarize(std::vector<double> samples_ms) {
  if (samples_ms.empty()) throw EmptySamples("summarize: no samples");
  std::sort(samples_ms.begin(), samples_ms.end());
  const size_t n = samples_ms.size();

  LatencyStats s;
  s.n = n;
  s.mean_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / static_cast<double>(n);
  if (n > 1) {
    double acc = 0.0;
    for (double v : samples_ms) acc += (v - s.mean_ms) * (v - s.mean_ms);
    s.std_ms = std::sqrt(acc / static_cast<double>(n - 1));
  }

  auto nearest_rank = [&](double p) {
    size_t rank = static_cast<size_t>(std::ceil(p * static_cast<double>(n)));
    rank = std::clamp<size_t>(rank, 1, n);
    return samples_ms[rank - 1];
  };
  s.p50_ms = nearest_rank(0.50);
  s.p90_ms = nearest_rank(0.90);
  s.p99_ms = nearest_rank(0.99);

  s.cdf.reserve(n);
  for (size_t i = 0; i < n; ++i)
    s.cdf.emplace_back(samples_ms[i], static_cast<double>(i + 1) / static_cast<double>(n));
  return s;
}

void BenchConfig::validate() const {
  if (batch_sizes.empty()) throw std::invalid_argument("bench: batch_sizes must be non-empty");
  if (repetitions < 30) throw std::invalid_argument("bench: repetitions must be at least 30");
  if (n_cells == 0) throw std::invalid_argument("bench: n_cells must be positive");
  if (memory_budget_bytes == 0) throw std::invalid_argument("bench: memory_budget_bytes must be positive");
}

std::vector<geo::CellId> bench_cells(size_t n) {
  static constexpr int32_t kDirs[6][2] = {{1, 0}, {1, -1}, {0, -1}, {-1, 0}, {-1, 1}, {0, 1}};
  std::vector<geo::CellId> out;
  out.reserve(n);
  if (n == 0) return out;
  out.push_back({0, 0});
  for (int32_t k = 1; out.size() < n; ++k) {
    geo::CellId c{-k, k};
    for (int side = 0; side < 6 && out.size() < n; ++side)
      for (int32_t step = 0; step < k && out.size() < n; ++step) {
        out.push_back(c);
        c.q += kDirs[side][0];
        c.r += kDirs[side][1];
      }
  }
  return out;
}

std::vector<mec::BufferedFrame> build_corpus(const geo::HexGrid& grid, size_t batch,
                                             size_t n_cells, uint64_t seed,
                                             uint64_t gen_time_ms) {
  auto cells = bench_cells(n_cells);
  const auto& proj = grid.projection();
  const double jitter = grid.config().apothem_m() / 2.0;

  std::vector<geo::LocalProjection::Xy> centers;
  centers.reserve(cells.size());
  for (const auto& c : cells) centers.push_back(proj.project(grid.cell_center(c)));

  fleet::DetRng rng(seed, 0xbe9c);
  std::vector<mec::BufferedFrame> out;
  out.reserve(batch);
  for (size_t i = 0; i < batch; ++i) {
    const auto& ctr = centers[i % cells.size()];
    geo::GeoPoint p = proj.unproject(ctr.x + rng.uniform(-jitter, jitter),
                                     ctr.y + rng.uniform(-jitter, jitter));
    cam::CamMessage m;
    m.station_id = static_cast<uint32_t>(i + 1);
    m.gen_time_ms = gen_time_ms;
    m.lat = p.lat;
    m.lon = p.lon;
    m.station_type = cam::StationType::car;
    m.heading_deg = std::min(rng.uniform(0.0, 360.0), 359.9);
    m.speed_mps = rng.uniform(0.0, 50.0);
    m.accel_mps2 = rng.uniform(-3.0, 3.0);

    auto frame = cam::encode_cam(m);
    mec::BufferedFrame bf;
    bf.bytes.assign(reinterpret_cast<const char*>(frame.data()), frame.size());
    bf.arrival_ms = gen_time_ms;
    out.push_back(std::move(bf));
  }
  return out;
}

namespace {

constexpr uint64_t kStepMs = 50;       // virtual time per repetition, one flush period
constexpr uint64_t kRetainMs = 10'000; // keeps the store at a steady working set
constexpr double kFlushBudgetMs = 50.0;

// Rewrites the generation timestamp (u64 LE at offset 6) so a cached corpus
// can stand in for a freshly generated batch each repetition.
void restamp(std::vector<mec::BufferedFrame>& frames, uint64_t gen_ms) {
  for (auto& f : frames) {
    for (int b = 0; b < 8; ++b)
      f.bytes[6 + b] = static_cast<char>(static_cast<uint8_t>(gen_ms >> (8 * b)));
    f.arrival_ms = gen_ms;
  }
}

store::EdmStore fresh_store(size_t batch, size_t memory_budget_bytes) {
  store::StoreConfig scfg;
  scfg.max_rows = batch * (kRetainMs / kStepMs + 20);
  scfg.memory_budget_bytes = memory_budget_bytes;
  return store::EdmStore(scfg);
}

double since_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Keeps query results observable so the timed calls cannot be elided.
void sink(size_t v) { asm volatile("" : : "g"(v) : "memory"); }

}  // namespace

std::vector<InsertionResult> run_insertion_bench(const BenchConfig& cfg) {
  cfg.validate();
  geo::HexGrid grid(cfg.grid);
  store::RetentionConfig retain{kRetainMs, 1'000};

  std::vector<InsertionResult> out;
  for (size_t batch : cfg.batch_sizes) {
    InsertionResult row;
    row.batch_size = batch;
    if (batch == 0) {
      out.push_back(std::move(row));
      continue;
    }

    auto st = fresh_store(batch, cfg.memory_budget_bytes);
    uint64_t now = 1'000'000'000;
    auto corpus = build_corpus(grid, batch, cfg.n_cells, cfg.seed, now);

    std::vector<double> dec_ms, ins_ms, tot_ms;
    dec_ms.reserve(cfg.repetitions);
    ins_ms.reserve(cfg.repetitions);
    tot_ms.reserve(cfg.repetitions);
    for (size_t rep = 0; rep < cfg.repetitions; ++rep) {
      now += kStepMs;
      restamp(corpus, now);
      auto dec = mec::decode_batch(corpus, grid);
      auto ins = st.insert_batch(std::move(dec.points), now);
      dec_ms.push_back(dec.t_decode_ms);
      ins_ms.push_back(ins.t_insertion_ms);
      tot_ms.push_back(dec.t_decode_ms + ins.t_insertion_ms);
      st.prune(now, retain);
    }
    row.decode = summarize(dec_ms);
    row.insertion = summarize(ins_ms);
    row.total = summarize(tot_ms);
    row.realtime = row.total.mean_ms < kFlushBudgetMs;
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<QueryResult> run_query_bench(const BenchConfig& cfg) {
  cfg.validate();
  geo::HexGrid grid(cfg.grid);
  store::RetentionConfig retain{kRetainMs, 1'000};

  auto cells = bench_cells(cfg.n_cells);
  auto poly = grid.cell_polygon(cells[0]);
  double lat_min = poly[0].lat, lat_max = poly[0].lat;
  double lon_min = poly[0].lon, lon_max = poly[0].lon;
  for (const auto& c : poly) {
    lat_min = std::min(lat_min, c.lat);
    lat_max = std::max(lat_max, c.lat);
    lon_min = std::min(lon_min, c.lon);
    lon_max = std::max(lon_max, c.lon);
  }
  const store::Region bbox = store::Region::bbox(lat_min, lat_max, lon_min, lon_max);
  const store::Region cell0 = store::Region::in_cell(cells[0]);

  std::vector<QueryResult> out;
  for (size_t batch : cfg.batch_sizes) {
    QueryResult row;
    row.batch_size = batch;
    if (batch == 0) {
      out.push_back(std::move(row));
      continue;
    }

    auto st = fresh_store(batch, cfg.memory_budget_bytes);
    uint64_t now = 1'000'000'000;
    auto corpus = build_corpus(grid, batch, cfg.n_cells, cfg.seed, now);

    std::array<std::vector<double>, 5> samples;
    for (auto& v : samples) v.reserve(cfg.repetitions);

    for (size_t rep = 0; rep < cfg.repetitions; ++rep) {
      now += kStepMs;
      restamp(corpus, now);
      auto dec = mec::decode_batch(corpus, grid);
      auto ins = st.insert_batch(std::move(dec.points), now);
      st.prune(now, retain);

      const uint64_t window =
          std::max<uint64_t>(100, static_cast<uint64_t>(std::ceil(ins.t_insertion_ms)));
      const store::QuerySpec specs[5] = {
          {store::QueryMode::latest_per_vehicle, std::nullopt, bbox},
          {store::QueryMode::latest_per_vehicle, std::nullopt, cell0},
          {store::QueryMode::all_points, window, store::Region::none()},
          {store::QueryMode::all_points, window, bbox},
          {store::QueryMode::all_points, window, cell0},
      };
      for (int k = 0; k < 5; ++k) {
        auto t0 = std::chrono::steady_clock::now();
        auto rows = st.query(specs[k], now);
        double ms = since_ms(t0);
        sink(rows.size());
        samples[k].push_back(ms);
      }
    }
    for (int k = 0; k < 5; ++k) row.q[k] = summarize(samples[k]);
    out.push_back(std::move(row));
  }
  return out;
}

void CapacityConfig::validate() const {
  if (n_vehicles == 0) throw std::invalid_argument("capacity: n_vehicles must be positive");
  if (rate_hz < 1.0 || rate_hz > 10.0)
    throw std::invalid_argument("capacity: rate_hz must lie in [1, 10]");
  if (t_buffer_ms == 0) throw std::invalid_argument("capacity: t_buffer_ms must be positive");
  if (duration_s == 0) throw std::invalid_argument("capacity: duration_s must be positive");
  if (probe_hz <= 0.0 || probe_hz > 200.0)
    throw std::invalid_argument("capacity: probe_hz must lie in (0, 200]");
  if (probe_poll_ms == 0) throw std::invalid_argument("capacity: probe_poll_ms must be positive");
  if (fleet_workers == 0) throw std::invalid_argument("capacity: fleet_workers must be positive");
  fleet::SyntheticModel m = area;
  m.n_vehicles = n_vehicles;
  m.seed = seed;
  m.validate();
}

namespace {

constexpr uint32_t kProbeStation = 4'000'000'000u;

// Pulls the generation timestamps of the probe station's rows out of a CSV
// response without parsing the other ~10^3 rows' fields.
void probe_gens_in(std::string_view csv, std::vector<uint64_t>& out) {
  constexpr std::string_view kPrefix = "4000000000,";
  size_t pos = 0;
  while (pos < csv.size()) {
    size_t eol = csv.find('\n', pos);
    if (eol == std::string_view::npos) eol = csv.size();
    std::string_view line = csv.substr(pos, eol - pos);
    pos = eol + 1;
    if (!strings::starts_with(line, kPrefix)) continue;
    auto fields = strings::split(line, ',');
    if (fields.size() < 3) continue;
    if (auto gen = strings::to_u64(fields[2])) out.push_back(*gen);
  }
}

}  // namespace

CapacityReport run_capacity_bench(const CapacityConfig& cfg) {
  cfg.validate();
  RealClock clock;

  const geo::GeoPoint center{(cfg.area.lat_min + cfg.area.lat_max) / 2.0,
                             (cfg.area.lon_min + cfg.area.lon_max) / 2.0};
  geo::HexGridConfig gcfg = cfg.grid;
  if (gcfg.origin.lat == 0.0 && gcfg.origin.lon == 0.0) gcfg.origin = center;

  registry::RegistryServerConfig rcfg;
  rcfg.listen = {"127.0.0.1", 0};
  registry::RegistryServer reg(rcfg, clock);
  reg.start();

  // One server covers the whole area; handover stays quiet and every login
  // lands here.
  const double reach =
      geo::haversine_m(center, {cfg.area.lat_max, cfg.area.lon_max}) * 1.2 + 1'000.0;
  mec::MecConfig mcfg;
  mcfg.mec_id = "bench_mec";
  mcfg.pos = center;
  mcfg.r_opt_m = reach;
  mcfg.r_oper_m = reach * 2.0;
  mcfg.listen = {"127.0.0.1", 0};
  mcfg.registry = reg.endpoint();
  mcfg.t_buffer_ms = cfg.t_buffer_ms;
  mcfg.retention.window_ms = 60'000;
  mcfg.retention.prune_interval_ms = 1'000;
  mcfg.store_cfg.max_rows =
      static_cast<size_t>(static_cast<double>(cfg.n_vehicles) * cfg.rate_hz * 60.0 * 2.0) +
      200'000;
  mcfg.grid = gcfg;
  mcfg.metrics_every_ms = 10'000;
  mec::MecServer mec(mcfg, clock);
  mec.start();

  fleet::FleetConfig fcfg;
  fcfg.registry = reg.endpoint();
  fcfg.grid = gcfg;
  fcfg.rate_hz = cfg.rate_hz;
  fcfg.t_send_ms = cfg.t_send_ms;
  fcfg.workers = cfg.fleet_workers;
  fcfg.synthetic = cfg.area;
  fcfg.synthetic->n_vehicles = cfg.n_vehicles;
  fcfg.synthetic->seed = cfg.seed;
  fleet::FleetRunner fl(fcfg, clock);
  fl.start();

  CapacityReport r;
  r.n_vehicles = cfg.n_vehicles;
  r.rate_hz = cfg.rate_hz;
  r.t_buffer_ms = cfg.t_buffer_ms;
  r.duration_s = cfg.duration_s;

  // Let the whole fleet log in before the measured window opens.
  const uint64_t login_deadline = clock.now_ms() + cfg.login_wait_ms;
  while (clock.now_ms() < login_deadline && fl.counters().logins < cfg.n_vehicles)
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  if (fl.counters().logins < cfg.n_vehicles)
    log::warn("bench: only %llu of %zu vehicles logged in before the run",
              static_cast<unsigned long long>(fl.counters().logins), cfg.n_vehicles);

  const auto mec0 = mec.counters();
  const auto fl0 = fl.counters();

  // The probe is one more station on the normal data path: tagged frames in,
  // window queries out, availability = first sighting minus generation time.
  // It sits in a cell of its own just east of the fleet area and queries only
  // that cell, so responses stay a handful of rows at any fleet size and the
  // measurement does not load the server it is measuring.
  auto probe = bus::BrokerClient::connect(mec.endpoint(), "bench-probe",
                                          bus::BrokerClient::Options{2'000});
  probe.subscribe("bench_mec/bench_probe/response/1");
  geo::HexGrid grid(gcfg);
  const auto east_xy = grid.projection().project({center.lat, cfg.area.lon_max});
  const geo::GeoPoint probe_pos = grid.projection().unproject(east_xy.x + 2'000.0, east_xy.y);
  const std::string probe_cell = grid.cell_of(probe_pos).encode();
  const std::string feed_topic = "bench_mec/edm_feed/" + probe_cell;
  // Rows stay query-visible for the whole window; t_buffer plus three poll
  // slots rides out scheduler stalls.
  const uint64_t window_ms = cfg.t_buffer_ms + 3 * cfg.probe_poll_ms;
  const std::string query_payload =
      "mode=all;window_ms=" + std::to_string(window_ms) + ";region=cell:" + probe_cell;
  const uint64_t probe_period = std::max<uint64_t>(1, static_cast<uint64_t>(1000.0 / cfg.probe_hz));
  // Dithers the send phase so tagged frames sweep the whole buffer-wait
  // range instead of phase-locking to the flush cadence.
  fleet::DetRng dither(cfg.seed, 0xd17e);

  std::vector<double> avail_ms;
  std::unordered_map<uint64_t, uint64_t> pending;  // gen -> send wall time
  std::vector<uint64_t> seen;
  uint64_t last_gen = 0;
  const uint64_t t_end = clock.now_ms() + cfg.duration_s * 1'000;
  uint64_t next_send = clock.now_ms();
  uint64_t next_poll = clock.now_ms() + cfg.probe_poll_ms;
  const uint64_t give_up_ms = window_ms + 4 * cfg.probe_poll_ms + cfg.t_buffer_ms + 2'000;

  auto record = [&](const std::string& payload) {
    seen.clear();
    probe_gens_in(payload, seen);
    const uint64_t now = clock.now_ms();
    for (uint64_t g : seen) {
      auto it = pending.find(g);
      if (it == pending.end()) continue;
      avail_ms.push_back(static_cast<double>(now - g));
      pending.erase(it);
    }
  };
  auto poll_once = [&]() {
    probe.publish("bench_mec/bench_probe/query/1", query_payload);
    if (auto d = probe.poll(static_cast<int>(cfg.probe_poll_ms))) {
      record(d->payload);
      while (auto more = probe.take()) record(more->payload);
    }
    const uint64_t now = clock.now_ms();
    for (auto it = pending.begin(); it != pending.end();) {
      if (now - it->first > give_up_ms) {
        log::debug("bench: probe frame gen=%llu never surfaced (%llu ms)",
                   static_cast<unsigned long long>(it->first),
                   static_cast<unsigned long long>(now - it->first));
        ++r.probe_lost;
        it = pending.erase(it);
      } else {
        ++it;
      }
    }
  };

  while (clock.now_ms() < t_end) {
    uint64_t now = clock.now_ms();
    if (now >= next_send) {
      cam::CamMessage m;
      m.station_id = kProbeStation;
      m.gen_time_ms = std::max(now, last_gen + 1);
      last_gen = m.gen_time_ms;
      m.lat = probe_pos.lat;
      m.lon = probe_pos.lon;
      auto f = cam::encode_cam(m);
      probe.publish(feed_topic,
                    std::string_view(reinterpret_cast<const char*>(f.data()), f.size()));
      pending.emplace(m.gen_time_ms, now);
      ++r.probe_sent;
      while (next_send <= now) next_send += probe_period + dither.bits() % (probe_period / 2 + 1);
    }
    if (now >= next_poll) {
      poll_once();
      now = clock.now_ms();
      while (next_poll <= now) next_poll += cfg.probe_poll_ms;
    }
    now = clock.now_ms();
    const uint64_t wake = std::min(next_send, next_poll);
    if (wake > now) std::this_thread::sleep_for(std::chrono::milliseconds(wake - now));
  }

  // Straggler sweep: stop sending, keep polling until the pipeline drains.
  const uint64_t drain_end = clock.now_ms() + give_up_ms;
  while (!pending.empty() && clock.now_ms() < drain_end) {
    poll_once();
    std::this_thread::sleep_for(std::chrono::milliseconds(cfg.probe_poll_ms));
  }
  r.probe_lost += pending.size();

  const auto mec1 = mec.counters();
  const auto fl1 = fl.counters();
  r.logins = fl1.logins;
  r.frames_sent = fl1.frames - fl0.frames;
  r.frames_stored = mec1.stored - mec0.stored;
  r.buffer_drops = mec1.dropped - mec0.dropped;
  r.malformed = mec1.malformed - mec0.malformed;
  r.flushes = mec1.flushes - mec0.flushes;
  r.budget_violations = mec1.budget_violations - mec0.budget_violations;
  r.budget_ok_fraction =
      r.flushes == 0 ? 1.0
                     : 1.0 - static_cast<double>(r.budget_violations) / static_cast<double>(r.flushes);
  r.saturated = r.budget_violations > 0;
  if (!avail_ms.empty()) r.availability = summarize(std::move(avail_ms));

  probe.disconnect();
  fl.stop();
  mec.stop();
  reg.stop();
  return r;
}

// ---- CSV emitters ----

namespace {

std::string fmt_ms(double v) { return strings::format_double(v, 6); }

void meta_line(std::string& out, const BenchConfig& cfg) {
  out += "# reps=" + std::to_string(cfg.repetitions) + " n_cells=" + std::to_string(cfg.n_cells) +
         " memory_budget_bytes=" + std::to_string(cfg.memory_budget_bytes) +
         " seed=" + std::to_string(cfg.seed) + "\n";
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("bench: cannot write " + path);
  f << body;
}

}  // namespace

std::string render_cdf_csv(const LatencyStats& s) {
  std::string out = "latency_ms,fraction\n";
  for (const auto& [ms, frac] : s.cdf) out += fmt_ms(ms) + "," + fmt_ms(frac) + "\n";
  return out;
}

std::string render_insertion_csv(const std::vector<InsertionResult>& rows, const BenchConfig& cfg) {
  std::string out = "# edm insertion bench\n";
  meta_line(out, cfg);
  out +=
      "batch_size,decode_mean_ms,decode_std_ms,insert_mean_ms,insert_std_ms,"
      "total_mean_ms,total_std_ms,realtime\n";
  for (const auto& r : rows) {
    out += std::to_string(r.batch_size) + "," + fmt_ms(r.decode.mean_ms) + "," +
           fmt_ms(r.decode.std_ms) + "," + fmt_ms(r.insertion.mean_ms) + "," +
           fmt_ms(r.insertion.std_ms) + "," + fmt_ms(r.total.mean_ms) + "," +
           fmt_ms(r.total.std_ms) + "," + (r.realtime ? "1" : "0") + "\n";
  }
  return out;
}

std::string render_query_csv(const std::vector<QueryResult>& rows, const BenchConfig& cfg) {
  std::string out = "# edm query bench\n";
  meta_line(out, cfg);
  out += "batch_size";
  for (int k = 1; k <= 5; ++k)
    out += ",q" + std::to_string(k) + "_mean_ms,q" + std::to_string(k) + "_std_ms";
  out += "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.batch_size);
    for (const auto& q : r.q) out += "," + fmt_ms(q.mean_ms) + "," + fmt_ms(q.std_ms);
    out += "\n";
  }
  return out;
}

std::string render_capacity_csv(const CapacityReport& r) {
  std::string out = "metric,value\n";
  auto kv = [&](const char* k, const std::string& v) { out += std::string(k) + "," + v + "\n"; };
  kv("n_vehicles", std::to_string(r.n_vehicles));
  kv("rate_hz", strings::format_double(r.rate_hz, 2));
  kv("t_buffer_ms", std::to_string(r.t_buffer_ms));
  kv("duration_s", std::to_string(r.duration_s));
  kv("logins", std::to_string(r.logins));
  kv("frames_sent", std::to_string(r.frames_sent));
  kv("frames_stored", std::to_string(r.frames_stored));
  kv("buffer_drops", std::to_string(r.buffer_drops));
  kv("malformed", std::to_string(r.malformed));
  kv("flushes", std::to_string(r.flushes));
  kv("budget_violations", std::to_string(r.budget_violations));
  kv("budget_ok_fraction", fmt_ms(r.budget_ok_fraction));
  kv("saturated", r.saturated ? "1" : "0");
  kv("availability_samples", std::to_string(r.availability.n));
  kv("availability_mean_ms", fmt_ms(r.availability.mean_ms));
  kv("availability_p50_ms", fmt_ms(r.availability.p50_ms));
  kv("availability_p90_ms", fmt_ms(r.availability.p90_ms));
  kv("availability_p99_ms", fmt_ms(r.availability.p99_ms));
  kv("probe_sent", std::to_string(r.probe_sent));
  kv("probe_lost", std::to_string(r.probe_lost));
  return out;
}

std::vector<std::string> write_insertion_outputs(const std::vector<InsertionResult>& rows,
                                                 const BenchConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  std::string table = dir + "/insert_table.csv";
  write_file(table, render_insertion_csv(rows, cfg));
  paths.push_back(table);
  for (const auto& r : rows) {
    if (r.total.n == 0) continue;
    std::string p = dir + "/insert_cdf_batch" + std::to_string(r.batch_size) + ".csv";
    write_file(p, render_cdf_csv(r.total));
    paths.push_back(p);
  }
  return paths;
}

std::vector<std::string> write_query_outputs(const std::vector<QueryResult>& rows,
                                             const BenchConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  std::string table = dir + "/query_table.csv";
  write_file(table, render_query_csv(rows, cfg));
  paths.push_back(table);
  for (const auto& r : rows) {
    if (r.batch_size != 1000 || r.q[0].n == 0) continue;
    for (int k = 0; k < 5; ++k) {
      std::string p = dir + "/query_cdf_q" + std::to_string(k + 1) + "_batch1000.csv";
      write_file(p, render_cdf_csv(r.q[k]));
      paths.push_back(p);
    }
  }
  return paths;
}

std::vector<std::string> write_capacity_outputs(const CapacityReport& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  std::string table = dir + "/capacity_report.csv";
  write_file(table, render_capacity_csv(r));
  paths.push_back(table);
  if (r.availability.n > 0) {
    std::string p = dir + "/capacity_availability_cdf.csv";
    write_file(p, render_cdf_csv(r.availability));
    paths.push_back(p);
  }
  return paths;
}

}  // namespace edm::bench
