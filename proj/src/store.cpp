#include "edm/store.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>

namespace edm::store {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// Latest-row order: ts_ms, then gen_time_ms, then insertion order (the caller
// iterates in insertion order and replaces on >=).
bool newer_or_equal(const StoredPoint& a, const StoredPoint& b) {
  if (a.ts_ms != b.ts_ms) return a.ts_ms > b.ts_ms;
  return a.gen_time_ms >= b.gen_time_ms;
}

bool output_order(const StoredPoint& a, const StoredPoint& b) {
  if (a.station_id != b.station_id) return a.station_id < b.station_id;
  if (a.ts_ms != b.ts_ms) return a.ts_ms < b.ts_ms;
  return a.gen_time_ms < b.gen_time_ms;
}

}  // namespace

StoredPoint from_cam(const cam::CamMessage& m, uint64_t ts_ms) {
  StoredPoint p;
  p.station_id = m.station_id;
  p.ts_ms = ts_ms;
  p.gen_time_ms = m.gen_time_ms;
  p.lat = m.lat;
  p.lon = m.lon;
  p.station_type = m.station_type;
  p.heading_deg = m.heading_deg;
  p.speed_mps = m.speed_mps;
  p.accel_mps2 = m.accel_mps2;
  p.cell = m.cell;
  return p;
}

void RetentionConfig::validate() const {
  if (window_ms < 1'000) throw std::invalid_argument("retention window_ms must be >= 1000");
  if (prune_interval_ms == 0 || prune_interval_ms > window_ms) {
    throw std::invalid_argument("prune_interval_ms must be in [1, window_ms]");
  }
}

Region Region::bbox(double lat_min, double lat_max, double lon_min, double lon_max) {
  Region r;
  r.kind = Kind::bbox;
  r.lat_min = lat_min;
  r.lat_max = lat_max;
  r.lon_min = lon_min;
  r.lon_max = lon_max;
  return r;
}

Region Region::in_cell(const geo::CellId& c) {
  Region r;
  r.kind = Kind::cell;
  r.cell = c;
  return r;
}

bool Region::contains(const StoredPoint& p) const {
  switch (kind) {
    case Kind::none:
      return true;
    case Kind::bbox:
      return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
    case Kind::cell:
      return p.cell == cell;
  }
  return false;
}

void QuerySpec::validate() const {
  if (mode == QueryMode::latest_per_vehicle && region.kind == Region::Kind::none) {
    throw InvalidSpec("latest_per_vehicle requires a region");
  }
  if (time_window_ms && *time_window_ms == 0) throw InvalidSpec("time_window_ms must be > 0");
  if (region.kind == Region::Kind::bbox) {
    if (!(std::isfinite(region.lat_min) && std::isfinite(region.lat_max) &&
          std::isfinite(region.lon_min) && std::isfinite(region.lon_max))) {
      throw InvalidSpec("bbox bounds must be finite");
    }
    if (region.lat_min > region.lat_max || region.lon_min > region.lon_max) {
      throw InvalidSpec("bbox bounds out of order");
    }
  }
}

EdmStore::EdmStore(StoreConfig cfg) : cfg_(cfg) {}

InsertReport EdmStore::insert_batch(std::vector<StoredPoint> points, uint64_t now_ms) {
  auto t0 = std::chrono::steady_clock::now();
  InsertReport report;
  report.count = points.size();

  auto seg = std::make_shared<Segment>();
  seg->ts_ms = now_ms;
  seg->rows = std::move(points);
  for (uint32_t i = 0; i < seg->rows.size(); ++i) {
    seg->rows[i].ts_ms = now_ms;
    seg->by_cell[seg->rows[i].cell].push_back(i);
  }

  {
    std::unique_lock lock(mu_);
    if (rows_live_ + seg->rows.size() > cfg_.max_rows) {
      throw CapacityExceeded("insert would exceed max_rows=" + std::to_string(cfg_.max_rows));
    }
    if (!seg->rows.empty()) {
      rows_live_ += seg->rows.size();
      segments_.push_back(std::move(seg));
    }
    report.t_insertion_ms = elapsed_ms(t0);
    last_insert_ms_ = report.t_insertion_ms;
    last_batch_size_ = report.count;
  }
  return report;
}

std::vector<EdmStore::SegmentPtr> EdmStore::snapshot() const {
  std::shared_lock lock(mu_);
  return {segments_.begin(), segments_.end()};
}

std::vector<StoredPoint> EdmStore::query(const QuerySpec& spec, uint64_t now_ms) const {
  spec.validate();
  auto segments = snapshot();

  uint64_t cutoff = 0;
  if (spec.time_window_ms) {
    cutoff = now_ms >= *spec.time_window_ms ? now_ms - *spec.time_window_ms : 0;
  }

  std::vector<StoredPoint> out;
  if (spec.mode == QueryMode::all_points) {
    for (const auto& seg : segments) {
      if (seg->ts_ms < cutoff) continue;
      if (spec.region.kind == Region::Kind::cell) {
        auto it = seg->by_cell.find(spec.region.cell);
        if (it == seg->by_cell.end()) continue;
        for (uint32_t idx : it->second) out.push_back(seg->rows[idx]);
      } else {
        for (const StoredPoint& p : seg->rows) {
          if (spec.region.contains(p)) out.push_back(p);
        }
      }
    }
  } else {
    // Latest row per station among the rows matching the filters. Iterating
    // segments and rows in insertion order with a >= replace implements the
    // (ts_ms, gen_time_ms, insertion order) maximization.
    std::unordered_map<uint32_t, StoredPoint> latest;
    auto offer = [&](const StoredPoint& p) {
      auto [it, inserted] = latest.try_emplace(p.station_id, p);
      if (!inserted && newer_or_equal(p, it->second)) it->second = p;
    };
    for (const auto& seg : segments) {
      if (seg->ts_ms < cutoff) continue;
      if (spec.region.kind == Region::Kind::cell) {
        auto it = seg->by_cell.find(spec.region.cell);
        if (it == seg->by_cell.end()) continue;
        for (uint32_t idx : it->second) offer(seg->rows[idx]);
      } else {
        for (const StoredPoint& p : seg->rows) {
          if (spec.region.contains(p)) offer(p);
        }
      }
    }
    out.reserve(latest.size());
    for (auto& [_, p] : latest) out.push_back(p);
  }

  std::stable_sort(out.begin(), out.end(), output_order);
  return out;
}

size_t EdmStore::prune(uint64_t now_ms, const RetentionConfig& cfg) {
  cfg.validate();
  uint64_t cutoff = now_ms >= cfg.window_ms ? now_ms - cfg.window_ms : 0;
  size_t removed = 0;
  std::unique_lock lock(mu_);
  for (auto it = segments_.begin(); it != segments_.end();) {
    if ((*it)->ts_ms < cutoff) {
      removed += (*it)->rows.size();
      it = segments_.erase(it);
    } else {
      ++it;
    }
  }
  rows_live_ -= removed;
  return removed;
}

size_t EdmStore::rows_live() const {
  std::shared_lock lock(mu_);
  return rows_live_;
}

StoreMetrics EdmStore::metrics() const {
  std::shared_lock lock(mu_);
  return {last_insert_ms_, last_batch_size_, rows_live_, cfg_.memory_budget_bytes};
}

}  // namespace edm::store
