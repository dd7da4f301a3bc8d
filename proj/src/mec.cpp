#include "edm/mec.hpp"

#include <algorithm>
#include <chrono>

#include "edm/log.hpp"
#include "edm/strings.hpp"
#include "edm/topic.hpp"

namespace edm::mec {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

// ---- ITS query payload / response ----

std::optional<store::QuerySpec> parse_its_query(std::string_view payload) {
  auto mode = strings::kv_get(payload, "mode");
  auto window = strings::kv_get(payload, "window_ms");
  auto region = strings::kv_get(payload, "region");
  if (!mode || !window || !region) return std::nullopt;

  store::QuerySpec spec;
  if (*mode == "latest") {
    spec.mode = store::QueryMode::latest_per_vehicle;
  } else if (*mode == "all") {
    spec.mode = store::QueryMode::all_points;
  } else {
    return std::nullopt;
  }

  if (*window != "none") {
    auto w = strings::to_u64(*window);
    if (!w) return std::nullopt;
    spec.time_window_ms = *w;
  }

  if (*region == "none") {
    spec.region = store::Region::none();
  } else if (strings::starts_with(*region, "bbox:")) {
    auto f = strings::split(region->substr(5), ',');
    if (f.size() != 4) return std::nullopt;
    auto a = strings::to_double(f[0]);
    auto b = strings::to_double(f[1]);
    auto c = strings::to_double(f[2]);
    auto d = strings::to_double(f[3]);
    if (!a || !b || !c || !d) return std::nullopt;
    spec.region = store::Region::bbox(*a, *b, *c, *d);
  } else if (strings::starts_with(*region, "cell:")) {
    try {
      spec.region = store::Region::in_cell(geo::CellId::parse(region->substr(5)));
    } catch (const geo::BadCellId&) {
      return std::nullopt;
    }
  } else {
    return std::nullopt;
  }
  return spec;
}

static const char kCsvHeader[] = "station_id,ts_ms,gen_time_ms,lat,lon,type,heading,speed,accel,cell";

std::string render_response_csv(const std::vector<store::StoredPoint>& rows) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const store::StoredPoint& p : rows) {
    out += std::to_string(p.station_id);
    out += ',';
    out += std::to_string(p.ts_ms);
    out += ',';
    out += std::to_string(p.gen_time_ms);
    out += ',';
    out += strings::format_double(p.lat, 7);
    out += ',';
    out += strings::format_double(p.lon, 7);
    out += ',';
    out += cam::to_string(p.station_type);
    out += ',';
    out += strings::format_double(p.heading_deg, 1);
    out += ',';
    out += strings::format_double(p.speed_mps, 2);
    out += ',';
    out += strings::format_double(p.accel_mps2, 1);
    out += ',';
    out += p.cell.encode();
    out += '\n';
  }
  return out;
}

std::optional<std::vector<store::StoredPoint>> parse_response_csv(std::string_view csv) {
  std::vector<store::StoredPoint> rows;
  size_t pos = 0;
  bool first = true;
  while (pos < csv.size()) {
    size_t nl = csv.find('\n', pos);
    std::string_view line =
        csv.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? csv.size() : nl + 1;
    if (line.empty()) continue;
    if (first) {
      if (line != kCsvHeader) return std::nullopt;  // includes `error=` responses
      first = false;
      continue;
    }
    auto f = strings::split(line, ',');
    if (f.size() != 10) return std::nullopt;
    auto sid = strings::to_u64(f[0]);
    auto ts = strings::to_u64(f[1]);
    auto gen = strings::to_u64(f[2]);
    auto lat = strings::to_double(f[3]);
    auto lon = strings::to_double(f[4]);
    auto type = cam::station_type_from(f[5]);
    auto heading = strings::to_double(f[6]);
    auto speed = strings::to_double(f[7]);
    auto accel = strings::to_double(f[8]);
    if (!sid || !ts || !gen || !lat || !lon || !type || !heading || !speed || !accel) {
      return std::nullopt;
    }
    store::StoredPoint p;
    p.station_id = static_cast<uint32_t>(*sid);
    p.ts_ms = *ts;
    p.gen_time_ms = *gen;
    p.lat = *lat;
    p.lon = *lon;
    p.station_type = *type;
    p.heading_deg = *heading;
    p.speed_mps = *speed;
    p.accel_mps2 = *accel;
    try {
      p.cell = geo::CellId::parse(f[9]);
    } catch (const geo::BadCellId&) {
      return std::nullopt;
    }
    rows.push_back(p);
  }
  if (first) return std::nullopt;  // no header at all
  return rows;
}

// ---- pure server pieces ----

std::optional<HandoverDirective> HandoverTracker::evaluate(uint32_t station, const geo::GeoPoint& p,
                                                           const MecDescriptor& self,
                                                           std::span<const MecDescriptor> neighbours,
                                                           uint64_t now_ms) {
  if (geo::haversine_m(p, self.pos) <= self.r_opt_m + cfg_.margin_m) return std::nullopt;

  const MecDescriptor* best = nullptr;
  double best_d = 0.0;
  for (const MecDescriptor& n : neighbours) {
    double d = geo::haversine_m(p, n.pos);
    if (d >= n.r_opt_m - cfg_.margin_m) continue;
    if (best == nullptr || d < best_d || (d == best_d && n.mec_id < best->mec_id)) {
      best = &n;
      best_d = d;
    }
  }
  if (best == nullptr) return std::nullopt;

  auto it = last_handover_ms_.find(station);
  if (it != last_handover_ms_.end() && now_ms - it->second <= cfg_.cooldown_ms) return std::nullopt;
  last_handover_ms_[station] = now_ms;
  return HandoverDirective{best->mec_id, best->endpoint};
}

std::vector<geo::CellId> border_cells(const MecDescriptor& self, const MecDescriptor& n,
                                      const geo::HexGrid& grid) {
  auto mine = grid.cells_in_disc(self.pos, self.r_oper_m);
  auto theirs = grid.cells_in_disc(n.pos, n.r_oper_m);
  std::vector<geo::CellId> out;
  std::set_intersection(mine.begin(), mine.end(), theirs.begin(), theirs.end(),
                        std::back_inserter(out));
  return out;
}

DecodeOutcome decode_batch(std::span<const BufferedFrame> frames, const geo::HexGrid& grid) {
  auto t0 = std::chrono::steady_clock::now();
  DecodeOutcome out;
  out.points.reserve(frames.size());
  out.source_index.reserve(frames.size());
  for (uint32_t i = 0; i < frames.size(); ++i) {
    try {
      cam::CamMessage m = cam::decode_cam(frames[i].bytes, grid);
      out.points.push_back(store::from_cam(m, 0));
      out.source_index.push_back(i);
    } catch (const cam::CodecError&) {
      ++out.malformed;
    }
  }
  out.t_decode_ms = elapsed_ms(t0);
  return out;
}

// ---- the server ----

MecServer::MecServer(MecConfig cfg, Clock& clock)
    : cfg_(std::move(cfg)),
      clock_(clock),
      broker_(bus::BrokerConfig{cfg_.listen, bus::kDefaultMaxPayload, 10'000}),
      grid_(std::make_unique<geo::HexGrid>(cfg_.grid)),
      store_(cfg_.store_cfg),
      handover_(cfg_.handover) {
  cfg_.retention.validate();
}

MecServer::~MecServer() { stop(); }

net::Endpoint MecServer::endpoint() const { return broker_.endpoint(); }

MecDescriptor MecServer::descriptor() const {
  MecDescriptor d;
  d.mec_id = cfg_.mec_id;
  d.pos = cfg_.pos;
  d.r_opt_m = cfg_.r_opt_m;
  d.r_oper_m = cfg_.r_oper_m;
  d.endpoint = broker_.endpoint().str();
  return d;
}

void MecServer::start() {
  if (running_) return;
  broker_.start();

  broker_.internal_subscribe(cfg_.mec_id + "-ingest", {cfg_.mec_id + "/edm_feed/#"},
                             [this](std::string_view, std::string_view payload) {
                               ingest_cam(payload, false);
                             });
  broker_.internal_subscribe(cfg_.mec_id + "-its", {cfg_.mec_id + "/+/query/+"},
                             [this](std::string_view topic, std::string_view payload) {
                               on_query(topic, payload);
                             });

  running_ = true;
  flush_thread_ = std::jthread([this](std::stop_token st) { flush_worker(st); });
  query_thread_ = std::jthread([this](std::stop_token st) { query_worker(st); });
  if (cfg_.registry) {
    registry_thread_ = std::jthread([this](std::stop_token st) { registry_worker(st); });
  }
}

void MecServer::stop() {
  if (!running_) return;
  if (registry_thread_.joinable()) {
    registry_thread_.request_stop();
    registry_thread_.join();
  }
  {
    // Collect the links under the lock, then let them die outside it: the
    // jthread dtors join, and the workers take border_mu_ to snapshot state.
    std::vector<std::shared_ptr<BorderLink>> doomed;
    {
      std::lock_guard lock(border_mu_);
      for (auto& [_, link] : borders_) {
        link->thread.request_stop();
        doomed.push_back(link);
      }
      for (auto& link : border_graveyard_) {
        link->thread.request_stop();
        doomed.push_back(link);
      }
      borders_.clear();
      border_graveyard_.clear();
    }
  }
  if (query_thread_.joinable()) {
    query_thread_.request_stop();
    query_cv_.notify_all();
    query_thread_.join();
  }
  if (flush_thread_.joinable()) {
    flush_thread_.request_stop();
    flush_thread_.join();
  }
  broker_.stop();
  running_ = false;
}

bool MecServer::ingest_cam(std::string_view raw, bool mirrored) {
  uint64_t arrival = clock_.now_ms();
  {
    std::lock_guard lock(ingest_mu_);
    if (active_.size() >= cfg_.active_limit) {
      ctr_.dropped.fetch_add(1, std::memory_order_relaxed);
      return false;
    }
    active_.push_back({std::string(raw), arrival, mirrored});
  }
  ctr_.accepted.fetch_add(1, std::memory_order_relaxed);
  if (mirrored) ctr_.mirrored.fetch_add(1, std::memory_order_relaxed);
  return true;
}

FlushReport MecServer::flush_now() {
  {
    std::lock_guard lock(ingest_mu_);
    std::swap(active_, flushing_);  // O(1); ingest keeps filling the new active
  }

  FlushReport report;
  report.count = flushing_.size();
  DecodeOutcome dec = decode_batch(flushing_, *grid_);
  report.t_decode_ms = dec.t_decode_ms;

  // Handover runs over the just-decoded batch, once per station, on its
  // latest point. Mirrored frames are skipped: those stations are assigned
  // to the neighbour and are not listening to this MEC's handover topic.
  {
    std::vector<MecDescriptor> nbs = neighbours();
    if (!nbs.empty()) {
      std::unordered_map<uint32_t, size_t> latest;
      for (size_t i = 0; i < dec.points.size(); ++i) {
        if (flushing_[dec.source_index[i]].mirrored) continue;
        latest[dec.points[i].station_id] = i;
      }
      MecDescriptor self = descriptor();
      uint64_t now = clock_.now_ms();
      for (const auto& [station, idx] : latest) {
        const store::StoredPoint& p = dec.points[idx];
        auto d = handover_.evaluate(station, {p.lat, p.lon}, self, nbs, now);
        if (!d) continue;
        broker_.publish(cfg_.mec_id + "/handover/" + std::to_string(station),
                        "target=" + d->target_mec + ";endpoint=" + d->endpoint);
        ctr_.handovers.fetch_add(1, std::memory_order_relaxed);
      }
    }
  }
  flushing_.clear();

  size_t batch = dec.points.size();
  if (batch > 0) {
    uint64_t now = clock_.now_ms();
    // This worker is the only writer, so the capacity pre-check is exact.
    // A batch that still does not fit after reclaiming expired rows is shed
    // whole, counted as dropped so the conservation identity stays exact.
    if (store_.rows_live() + batch > cfg_.store_cfg.max_rows) {
      store_.prune(now, cfg_.retention);
    }
    try {
      auto ins = store_.insert_batch(std::move(dec.points), now);
      report.t_insertion_ms = ins.t_insertion_ms;
      ctr_.stored.fetch_add(batch, std::memory_order_relaxed);
    } catch (const store::CapacityExceeded&) {
      ctr_.dropped.fetch_add(batch, std::memory_order_relaxed);
      log::warn("%s: store full, dropped a batch of %zu", cfg_.mec_id.c_str(), batch);
    }
  }

  ctr_.malformed.fetch_add(dec.malformed, std::memory_order_relaxed);
  report.budget_ok = report.t_decode_ms + report.t_insertion_ms < static_cast<double>(cfg_.t_buffer_ms);
  ctr_.flushes.fetch_add(1, std::memory_order_relaxed);
  if (!report.budget_ok) ctr_.budget_violations.fetch_add(1, std::memory_order_relaxed);

  {
    std::lock_guard lock(state_mu_);
    last_flush_ = report;
  }
  return report;
}

void MecServer::flush_worker(std::stop_token st) {
  uint64_t next_flush = clock_.now_ms() + cfg_.t_buffer_ms;
  uint64_t next_prune = clock_.now_ms() + cfg_.retention.prune_interval_ms;
  uint64_t next_metrics = clock_.now_ms() + cfg_.metrics_every_ms;
  while (!st.stop_requested()) {
    clock_.wait_until(next_flush, st);
    if (st.stop_requested()) break;
    FlushReport r = flush_now();

    uint64_t now = clock_.now_ms();
    // An overrunning flush delays the next one; no concurrent flushes, no
    // burst catch-up.
    next_flush += cfg_.t_buffer_ms;
    if (next_flush < now) next_flush = now;

    if (now >= next_prune) {
      store_.prune(now, cfg_.retention);
      next_prune = now + cfg_.retention.prune_interval_ms;
    }
    if (now >= next_metrics) {
      log::info("flush count=%zu t_decode=%.3f t_insert=%.3f budget_ok=%d", r.count, r.t_decode_ms,
                r.t_insertion_ms, r.budget_ok ? 1 : 0);
      next_metrics = now + cfg_.metrics_every_ms;
    }
  }
}

void MecServer::on_query(std::string_view topic, std::string_view payload) {
  auto seg = bus::topic_segments(topic);
  if (seg.size() != 4 || seg[2] != "query") return;  // not an ITS query topic
  std::lock_guard lock(query_mu_);
  if (query_q_.size() >= cfg_.query_queue_limit) {
    ctr_.query_errors.fetch_add(1, std::memory_order_relaxed);
    return;
  }
  query_q_.push_back({std::string(seg[1]), std::string(seg[3]), std::string(payload)});
  query_cv_.notify_one();
}

void MecServer::answer(const QueryJob& job) {
  std::string response;
  auto spec = parse_its_query(job.payload);
  if (!spec) {
    response = "error=malformed query";
    ctr_.query_errors.fetch_add(1, std::memory_order_relaxed);
  } else {
    try {
      auto rows = store_.query(*spec, clock_.now_ms());
      response = render_response_csv(rows);
    } catch (const store::InvalidSpec& e) {
      response = std::string("error=") + e.what();
      ctr_.query_errors.fetch_add(1, std::memory_order_relaxed);
    }
  }
  try {
    broker_.publish(cfg_.mec_id + "/" + job.app_id + "/response/" + job.vehicle_id, response);
  } catch (const bus::PayloadTooLarge&) {
    broker_.publish(cfg_.mec_id + "/" + job.app_id + "/response/" + job.vehicle_id,
                    "error=response too large");
    ctr_.query_errors.fetch_add(1, std::memory_order_relaxed);
  }
  ctr_.queries.fetch_add(1, std::memory_order_relaxed);
}

void MecServer::query_worker(std::stop_token st) {
  std::unique_lock lock(query_mu_);
  while (!st.stop_requested()) {
    query_cv_.wait(lock, st, [&] { return !query_q_.empty(); });
    if (st.stop_requested()) break;
    QueryJob job = std::move(query_q_.front());
    query_q_.pop_front();
    lock.unlock();
    answer(job);
    lock.lock();
  }
}

void MecServer::registry_worker(std::stop_token st) {
  const std::string nb_topic = "mec_registry/neighbours/" + cfg_.mec_id;
  bus::BrokerClient::Options opt;
  opt.timeout_ms = 1'000;  // keep shutdown snappy when the peer is going away
  while (!st.stop_requested()) {
    try {
      auto cli = bus::BrokerClient::connect(*cfg_.registry, cfg_.mec_id + "-registry", opt);
      cli.subscribe(nb_topic);  // active before login: the first notice cannot be missed
      cli.publish(cfg_.registry_id + "/mec/login", descriptor().to_line());
      log::info("%s: logged in at registry %s", cfg_.mec_id.c_str(), cfg_.registry->str().c_str());
      while (!st.stop_requested()) {
        if (auto d = cli.poll(100)) {
          if (d->topic == nb_topic) apply_neighbour_list(d->payload);
        }
      }
      cli.disconnect();
      return;
    } catch (const net::NetError& e) {
      log::warn("%s: registry connection lost (%s), retrying", cfg_.mec_id.c_str(), e.what());
      clock_.wait_for(cfg_.registry_retry_ms, st);
    }
  }
}

void MecServer::apply_neighbour_list(std::string_view payload) {
  std::vector<MecDescriptor> nbs;
  size_t pos = 0;
  while (pos < payload.size()) {
    size_t nl = payload.find('\n', pos);
    std::string_view line =
        payload.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? payload.size() : nl + 1;
    if (line.empty()) continue;
    auto d = MecDescriptor::parse_line(line);
    if (!d || d->mec_id == cfg_.mec_id) {
      log::warn("%s: ignoring bad neighbour line: %.*s", cfg_.mec_id.c_str(),
                static_cast<int>(line.size()), line.data());
      continue;
    }
    nbs.push_back(std::move(*d));
  }
  {
    std::lock_guard lock(state_mu_);
    neighbours_ = nbs;
  }
  log::info("%s: neighbour list updated, %zu neighbour(s)", cfg_.mec_id.c_str(), nbs.size());

  MecDescriptor self = descriptor();
  std::lock_guard lock(border_mu_);
  // Drop links to neighbours that vanished or no longer share border cells.
  for (auto it = borders_.begin(); it != borders_.end();) {
    auto found = std::find_if(nbs.begin(), nbs.end(),
                              [&](const MecDescriptor& n) { return n.mec_id == it->first; });
    bool keep = found != nbs.end() && !border_cells(self, *found, *grid_).empty();
    if (!keep) {
      it->second->thread.request_stop();
      border_graveyard_.push_back(it->second);
      it = borders_.erase(it);
    } else {
      ++it;
    }
  }
  // Create or refresh the rest.
  for (const MecDescriptor& n : nbs) {
    std::vector<geo::CellId> cells;
    try {
      cells = border_cells(self, n, *grid_);
    } catch (const geo::OutOfProjectionDomain&) {
      log::warn("%s: neighbour %s outside grid domain", cfg_.mec_id.c_str(), n.mec_id.c_str());
      continue;
    }
    if (cells.empty()) continue;
    auto it = borders_.find(n.mec_id);
    if (it == borders_.end()) {
      auto link = std::make_shared<BorderLink>();
      link->neighbour = n;
      link->cells = std::move(cells);
      BorderLink* raw = link.get();
      link->thread = std::jthread([this, raw](std::stop_token st) { border_worker(st, raw); });
      borders_.emplace(n.mec_id, std::move(link));
    } else if (!(it->second->neighbour == n) || it->second->cells != cells) {
      it->second->neighbour = n;
      it->second->cells = std::move(cells);
      ++it->second->generation;  // the worker reconnects and resubscribes
    }
  }
}

void MecServer::border_worker(std::stop_token st, BorderLink* link) {
  std::optional<bus::BrokerClient> cli;
  uint64_t seen_gen = 0;
  while (!st.stop_requested()) {
    MecDescriptor n;
    std::vector<geo::CellId> cells;
    uint64_t gen;
    {
      std::lock_guard lock(border_mu_);
      n = link->neighbour;
      cells = link->cells;
      gen = link->generation;
    }
    if (!cli || gen != seen_gen) {
      try {
        // Reconnecting under the same client id evicts the previous session
        // on the neighbour's broker, which clears the stale subscriptions.
        bus::BrokerClient::Options opt;
        opt.timeout_ms = 1'000;
        cli.emplace(bus::BrokerClient::connect(net::Endpoint::parse(n.endpoint),
                                               cfg_.mec_id + "-border-" + n.mec_id, opt));
        for (const geo::CellId& c : cells) {
          cli->subscribe(n.mec_id + "/edm_feed/" + c.encode());
        }
        seen_gen = gen;
        log::info("%s: mirroring %zu border cell(s) of %s", cfg_.mec_id.c_str(), cells.size(),
                  n.mec_id.c_str());
      } catch (const net::NetError& e) {
        cli.reset();
        log::warn("%s: border link to %s failed (%s)", cfg_.mec_id.c_str(), n.mec_id.c_str(),
                  e.what());
        clock_.wait_for(cfg_.registry_retry_ms, st);
        continue;
      }
    }
    try {
      if (auto d = cli->poll(100)) ingest_cam(d->payload, true);
    } catch (const net::NetError&) {
      cli.reset();  // neighbour broker went away; retry loop reconnects
    }
  }
  if (cli) cli->disconnect();
}

MecCounters MecServer::counters() const {
  MecCounters c;
  c.accepted = ctr_.accepted.load(std::memory_order_relaxed);
  c.dropped = ctr_.dropped.load(std::memory_order_relaxed);
  c.malformed = ctr_.malformed.load(std::memory_order_relaxed);
  c.stored = ctr_.stored.load(std::memory_order_relaxed);
  c.mirrored = ctr_.mirrored.load(std::memory_order_relaxed);
  c.flushes = ctr_.flushes.load(std::memory_order_relaxed);
  c.budget_violations = ctr_.budget_violations.load(std::memory_order_relaxed);
  c.handovers = ctr_.handovers.load(std::memory_order_relaxed);
  c.queries = ctr_.queries.load(std::memory_order_relaxed);
  c.query_errors = ctr_.query_errors.load(std::memory_order_relaxed);
  return c;
}

FlushReport MecServer::last_flush() const {
  std::lock_guard lock(state_mu_);
  return last_flush_;
}

std::vector<MecDescriptor> MecServer::neighbours() const {
  std::lock_guard lock(state_mu_);
  return neighbours_;
}

}  // namespace edm::mec
