#include "edm/bench.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unistd.h>

#include "doctest.h"
#include "edm/cam.hpp"
#include "edm/store.hpp"

using namespace edm;
using namespace edm::bench;

namespace {

const geo::GeoPoint kOrigin{52.0, 13.0};

geo::HexGridConfig grid_cfg() { return {kOrigin, 15000.0}; }

// Axial hex distance from the origin cell.
int ring_of(const geo::CellId& c) {
  return (std::abs(c.q) + std::abs(c.r) + std::abs(c.q + c.r)) / 2;
}

struct TempDir {
  std::string path;
  TempDir() {
    path = "/tmp/edm_bench_test_" + std::to_string(::getpid());
    std::filesystem::remove_all(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string last_line(const std::string& path) {
  std::ifstream f(path);
  REQUIRE(f.good());
  std::string line, last;
  while (std::getline(f, line))
    if (!line.empty()) last = line;
  return last;
}

}  // namespace

TEST_CASE("summarize matches hand-computed statistics") {
  auto s = summarize({5.0, 5.0, 5.0});
  CHECK(s.n == 3);
  CHECK(s.mean_ms == doctest::Approx(5.0));
  CHECK(s.std_ms == doctest::Approx(0.0));

  auto t = summarize({4.0, 2.0, 1.0, 3.0});
  CHECK(t.mean_ms == doctest::Approx(2.5));
  CHECK(t.std_ms == doctest::Approx(std::sqrt(5.0 / 3.0)));  // 1.2909...
  CHECK(t.p50_ms == doctest::Approx(2.0));                   // nearest rank: ceil(0.5*4) = 2nd
  CHECK(t.p90_ms == doctest::Approx(4.0));
  CHECK(t.p99_ms == doctest::Approx(4.0));

  auto one = summarize({7.5});
  CHECK(one.std_ms == 0.0);
  CHECK(one.p50_ms == doctest::Approx(7.5));
  CHECK(one.p99_ms == doctest::Approx(7.5));

  CHECK_THROWS_AS(summarize({}), EmptySamples);
}

TEST_CASE("summarize CDF is monotone and ends at one") {
  auto s = summarize({3.0, 1.0, 2.0, 2.0, 9.0});
  REQUIRE(s.cdf.size() == 5);
  CHECK(s.cdf.front().first == doctest::Approx(1.0));
  CHECK(s.cdf.back().first == doctest::Approx(9.0));
  CHECK(s.cdf.back().second == doctest::Approx(1.0));
  for (size_t i = 1; i < s.cdf.size(); ++i) {
    CHECK(s.cdf[i].first >= s.cdf[i - 1].first);
    CHECK(s.cdf[i].second > s.cdf[i - 1].second);
  }
}

TEST_CASE("bench config validation") {
  BenchConfig ok;
  ok.grid = grid_cfg();
  CHECK_NOTHROW(ok.validate());

  BenchConfig few = ok;
  few.repetitions = 29;
  CHECK_THROWS_AS(few.validate(), std::invalid_argument);

  BenchConfig none = ok;
  none.batch_sizes.clear();
  CHECK_THROWS_AS(none.validate(), std::invalid_argument);

  BenchConfig cells = ok;
  cells.n_cells = 0;
  CHECK_THROWS_AS(cells.validate(), std::invalid_argument);

  BenchConfig mem = ok;
  mem.memory_budget_bytes = 0;
  CHECK_THROWS_AS(mem.validate(), std::invalid_argument);
}

TEST_CASE("bench cells walk outward ring by ring without repeats") {
  auto cells = bench_cells(20);
  REQUIRE(cells.size() == 20);
  CHECK(cells[0] == geo::CellId{0, 0});

  std::set<geo::CellId> uniq(cells.begin(), cells.end());
  CHECK(uniq.size() == 20);

  // Ring sizes are 1, 6, 12, ...: rings 0..2 hold 19 cells, so the 20th
  // opens ring 3.
  for (size_t i = 0; i < cells.size(); ++i) {
    int expect = i == 0 ? 0 : (i < 7 ? 1 : (i < 19 ? 2 : 3));
    CHECK(ring_of(cells[i]) == expect);
  }

  CHECK(bench_cells(0).empty());
  CHECK(bench_cells(1).size() == 1);
}

TEST_CASE("corpus is deterministic, decodable, and evenly dealt onto cells") {
  geo::HexGrid grid(grid_cfg());
  auto a = build_corpus(grid, 100, 7, 42, 1'000'000);
  auto b = build_corpus(grid, 100, 7, 42, 1'000'000);
  REQUIRE(a.size() == 100);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].bytes == b[i].bytes);

  auto other = build_corpus(grid, 100, 7, 43, 1'000'000);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i].bytes != other[i].bytes) differs = true;
  CHECK(differs);

  auto dec = mec::decode_batch(a, grid);
  CHECK(dec.malformed == 0);
  REQUIRE(dec.points.size() == 100);

  auto cells = bench_cells(7);
  std::map<geo::CellId, int> per_cell;
  for (size_t i = 0; i < dec.points.size(); ++i) {
    CHECK(dec.points[i].station_id == i + 1);
    CHECK(dec.points[i].cell == cells[i % 7]);
    ++per_cell[dec.points[i].cell];
  }
  // 100 over 7 cells: counts differ by at most one.
  for (const auto& [cell, count] : per_cell) CHECK((count == 14 || count == 15));
}

TEST_CASE("insertion bench produces rows for every batch size") {
  BenchConfig cfg;
  cfg.grid = grid_cfg();
  cfg.batch_sizes = {0, 200};
  cfg.repetitions = 40;
  cfg.n_cells = 5;

  auto rows = run_insertion_bench(cfg);
  REQUIRE(rows.size() == 2);

  CHECK(rows[0].batch_size == 0);
  CHECK(rows[0].decode.n == 0);
  CHECK(rows[0].total.mean_ms == 0.0);
  CHECK(rows[0].realtime);

  CHECK(rows[1].batch_size == 200);
  CHECK(rows[1].decode.n == 40);
  CHECK(rows[1].insertion.n == 40);
  CHECK(rows[1].decode.mean_ms > 0.0);
  CHECK(rows[1].insertion.mean_ms > 0.0);
  CHECK(rows[1].total.mean_ms ==
        doctest::Approx(rows[1].decode.mean_ms + rows[1].insertion.mean_ms));
  CHECK(rows[1].total.cdf.back().second == doctest::Approx(1.0));
  CHECK(rows[1].realtime);  // 200 rows in under 50 ms on anything
}

TEST_CASE("query bench times all five shapes") {
  BenchConfig cfg;
  cfg.grid = grid_cfg();
  cfg.batch_sizes = {60};
  cfg.repetitions = 30;
  cfg.n_cells = 6;

  auto rows = run_query_bench(cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].batch_size == 60);
  for (const auto& q : rows[0].q) {
    CHECK(q.n == 30);
    CHECK(q.mean_ms >= 0.0);
    CHECK(q.cdf.back().second == doctest::Approx(1.0));
  }
}

TEST_CASE("the five bench query shapes agree on an empty store") {
  geo::HexGrid grid(grid_cfg());
  store::EdmStore st;
  auto cells = bench_cells(1);
  const store::Region cell0 = store::Region::in_cell(cells[0]);
  const store::Region box = store::Region::bbox(51.0, 53.0, 12.0, 14.0);
  const store::QuerySpec specs[5] = {
      {store::QueryMode::latest_per_vehicle, std::nullopt, box},
      {store::QueryMode::latest_per_vehicle, std::nullopt, cell0},
      {store::QueryMode::all_points, 100, store::Region::none()},
      {store::QueryMode::all_points, 100, box},
      {store::QueryMode::all_points, 100, cell0},
  };
  for (const auto& s : specs) CHECK(st.query(s, 5'000).empty());
}

TEST_CASE("csv emitters render schemas and cdf files end at one") {
  BenchConfig cfg;
  cfg.grid = grid_cfg();
  cfg.batch_sizes = {0, 1000};
  cfg.repetitions = 30;

  InsertionResult zero;
  zero.batch_size = 0;
  InsertionResult big;
  big.batch_size = 1000;
  big.decode = summarize({1.0, 2.0, 3.0});
  big.insertion = summarize({2.0, 2.5, 3.0});
  big.total = summarize({3.0, 4.5, 6.0});
  big.realtime = true;

  auto csv = render_insertion_csv({zero, big}, cfg);
  CHECK(csv.find("batch_size,decode_mean_ms,decode_std_ms,insert_mean_ms,insert_std_ms") !=
        std::string::npos);
  CHECK(csv.find("memory_budget_bytes=1048576") != std::string::npos);
  CHECK(csv.find("\n0,0.000000,") != std::string::npos);
  CHECK(csv.find("\n1000,2.000000,1.000000,") != std::string::npos);

  QueryResult qr;
  qr.batch_size = 1000;
  for (auto& q : qr.q) q = summarize({1.0, 2.0});
  auto qcsv = render_query_csv({qr}, cfg);
  CHECK(qcsv.find("q1_mean_ms,q1_std_ms") != std::string::npos);
  CHECK(qcsv.find("q5_mean_ms,q5_std_ms") != std::string::npos);

  TempDir dir;
  auto ipaths = write_insertion_outputs({zero, big}, cfg, dir.path);
  REQUIRE(ipaths.size() == 2);  // table plus one CDF; the zero row has none
  CHECK(ipaths[0].find("insert_table.csv") != std::string::npos);
  CHECK(last_line(ipaths[1]).find(",1.000000") != std::string::npos);

  auto qpaths = write_query_outputs({qr}, cfg, dir.path);
  REQUIRE(qpaths.size() == 6);  // table plus five per-query CDFs at batch 1000
  CHECK(last_line(qpaths[5]).find(",1.000000") != std::string::npos);

  CapacityReport rep;
  rep.n_vehicles = 10;
  rep.availability = summarize({20.0, 30.0, 40.0});
  auto cpaths = write_capacity_outputs(rep, dir.path);
  REQUIRE(cpaths.size() == 2);
  auto body = render_capacity_csv(rep);
  CHECK(body.find("metric,value") != std::string::npos);
  CHECK(body.find("availability_p99_ms,40.000000") != std::string::npos);
  CHECK(body.find("budget_ok_fraction,1.000000") != std::string::npos);
}

TEST_CASE("capacity config validation") {
  CapacityConfig ok;
  ok.n_vehicles = 5;
  CHECK_NOTHROW(ok.validate());

  CapacityConfig bad = ok;
  bad.rate_hz = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.n_vehicles = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ok;
  bad.probe_poll_ms = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("capacity bench runs the full stack and measures availability") {
  CapacityConfig cfg;
  cfg.n_vehicles = 4;
  cfg.rate_hz = 5.0;
  cfg.t_buffer_ms = 50;
  cfg.duration_s = 2;
  cfg.seed = 9;
  cfg.fleet_workers = 2;
  cfg.area.lat_min = 51.995;
  cfg.area.lat_max = 52.005;
  cfg.area.lon_min = 12.995;
  cfg.area.lon_max = 13.005;
  cfg.probe_hz = 10.0;
  cfg.probe_poll_ms = 20;
  cfg.login_wait_ms = 10'000;

  auto r = run_capacity_bench(cfg);
  CHECK(r.logins == 4);
  CHECK(r.frames_sent > 0);
  CHECK(r.frames_stored > 0);
  CHECK(r.buffer_drops == 0);
  CHECK(r.malformed == 0);
  CHECK(r.flushes > 0);
  CHECK(r.budget_ok_fraction == doctest::Approx(1.0));
  CHECK_FALSE(r.saturated);
  CHECK(r.probe_sent >= 15);
  CHECK(r.probe_lost == 0);
  REQUIRE(r.availability.n > 0);
  CHECK(r.availability.n == r.probe_sent);
  // Buffer wait is at most 50 ms and the stack is idle; generous sanity cap.
  CHECK(r.availability.p99_ms < 1'000.0);
  CHECK(r.availability.mean_ms > 0.0);
}
