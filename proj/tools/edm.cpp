#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "edm/bench.hpp"
#include "edm/broker.hpp"
#include "edm/broker_client.hpp"
#include "edm/clock.hpp"
#include "edm/fleet.hpp"
#include "edm/log.hpp"
#include "edm/mec.hpp"
#include "edm/registry.hpp"
#include "edm/strings.hpp"

using namespace edm;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

void install_signals() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
}

void wait_for_signal() {
  while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(200));
}

geo::GeoPoint parse_latlon(const std::string& s) {
  auto parts = strings::split(s, ',');
  if (parts.size() != 2) throw CLI::ValidationError("expected LAT,LON");
  auto lat = strings::to_double(parts[0]);
  auto lon = strings::to_double(parts[1]);
  if (!lat || !lon) throw CLI::ValidationError("expected LAT,LON as numbers");
  return {*lat, *lon};
}

std::vector<size_t> parse_batches(const std::string& s) {
  std::vector<size_t> out;
  for (auto part : strings::split(s, ',')) {
    auto v = strings::to_u64(part);
    if (!v) throw CLI::ValidationError("batch sizes must be non-negative integers");
    out.push_back(static_cast<size_t>(*v));
  }
  if (out.empty()) throw CLI::ValidationError("at least one batch size required");
  return out;
}

int run_broker(const std::string& listen, size_t max_payload) {
  bus::BrokerConfig cfg;
  cfg.listen = net::Endpoint::parse(listen);
  cfg.max_payload = max_payload;
  bus::BrokerServer srv(cfg);
  srv.start();
  log::info("broker listening on %s", srv.endpoint().str().c_str());
  install_signals();
  wait_for_signal();
  srv.stop();
  return 0;
}

int run_registry(const std::string& listen, const std::string& snapshot,
                 const std::string& registry_id) {
  RealClock clock;
  registry::RegistryServerConfig cfg;
  cfg.listen = net::Endpoint::parse(listen);
  cfg.snapshot_path = snapshot;
  cfg.registry_id = registry_id;
  registry::RegistryServer srv(cfg, clock);
  srv.start();
  log::info("registry listening on %s", srv.endpoint().str().c_str());
  install_signals();
  wait_for_signal();
  srv.stop();
  return 0;
}

struct MecArgs {
  std::string id = "mec1";
  double lat = 0.0, lon = 0.0;
  double r_opt = 500.0, r_oper = 800.0;
  std::string broker;
  std::string registry;
  uint64_t t_buffer_ms = 50;
  uint64_t retention_ms = 60'000;
  std::string grid_origin;
  double cell_area = 15'000.0;
};

int run_mec(const MecArgs& a) {
  RealClock clock;
  mec::MecConfig cfg;
  cfg.mec_id = a.id;
  cfg.pos = {a.lat, a.lon};
  cfg.r_opt_m = a.r_opt;
  cfg.r_oper_m = a.r_oper;
  cfg.listen = net::Endpoint::parse(a.broker);
  if (!a.registry.empty()) cfg.registry = net::Endpoint::parse(a.registry);
  cfg.t_buffer_ms = a.t_buffer_ms;
  cfg.retention.window_ms = a.retention_ms;
  cfg.grid.origin = a.grid_origin.empty() ? cfg.pos : parse_latlon(a.grid_origin);
  cfg.grid.cell_area_m2 = a.cell_area;
  mec::MecServer srv(cfg, clock);
  srv.start();
  log::info("mec %s listening on %s%s", a.id.c_str(), srv.endpoint().str().c_str(),
            a.registry.empty() ? " (standalone, no registry)" : "");
  install_signals();
  wait_for_signal();
  srv.stop();
  return 0;
}

int run_mec_dump(const std::string& broker, const std::string& id) {
  auto ep = net::Endpoint::parse(broker);
  auto cli = bus::BrokerClient::connect(ep, "edm-dump", bus::BrokerClient::Options{5'000});
  const std::string nonce = std::to_string(static_cast<unsigned>(::getpid()));
  cli.subscribe(id + "/cli/response/" + nonce);
  cli.publish(id + "/cli/query/" + nonce, "mode=all;window_ms=none;region=none");
  auto d = cli.poll(5'000);
  cli.disconnect();
  if (!d) {
    log::error("dump: no response from %s within 5 s", id.c_str());
    return 1;
  }
  if (strings::starts_with(d->payload, "error=")) {
    log::error("dump: %s", d->payload.c_str());
    return 1;
  }
  std::fwrite(d->payload.data(), 1, d->payload.size(), stdout);
  return 0;
}

struct SimArgs {
  std::string registry;
  std::string mode = "synthetic";
  size_t n = 2000;
  std::string bbox;
  uint64_t seed = 7;
  double rate = 10.0;
  uint64_t t_send_ms = 0;
  std::string file;
  bool loop = false;
  std::string grid_origin;
  double cell_area = 15'000.0;
  size_t workers = 4;
};

int run_sim(const SimArgs& a) {
  RealClock clock;
  fleet::FleetConfig cfg;
  cfg.registry = net::Endpoint::parse(a.registry);
  cfg.rate_hz = a.rate;
  cfg.t_send_ms = a.t_send_ms;
  cfg.workers = a.workers;
  cfg.grid.cell_area_m2 = a.cell_area;
  if (a.mode == "synthetic") {
    fleet::SyntheticModel m;
    if (!a.bbox.empty()) {
      auto parts = strings::split(a.bbox, ',');
      if (parts.size() != 4) throw CLI::ValidationError("--bbox expects lat_min,lat_max,lon_min,lon_max");
      auto f = [](std::string_view s) {
        auto v = strings::to_double(s);
        if (!v) throw CLI::ValidationError("--bbox expects numbers");
        return *v;
      };
      m.lat_min = f(parts[0]);
      m.lat_max = f(parts[1]);
      m.lon_min = f(parts[2]);
      m.lon_max = f(parts[3]);
    }
    m.n_vehicles = a.n;
    m.seed = a.seed;
    cfg.synthetic = m;
    cfg.grid.origin = a.grid_origin.empty()
                          ? geo::GeoPoint{(m.lat_min + m.lat_max) / 2, (m.lon_min + m.lon_max) / 2}
                          : parse_latlon(a.grid_origin);
  } else {
    if (a.file.empty()) throw CLI::ValidationError("--mode fcd requires --file");
    if (a.grid_origin.empty())
      throw CLI::ValidationError("--mode fcd requires --grid-origin (the deployment's shared projection center)");
    cfg.fcd = fleet::FcdModel{a.file, a.loop};
    cfg.grid.origin = parse_latlon(a.grid_origin);
  }

  fleet::FleetRunner fl(cfg, clock);
  fl.start();
  log::info("sim: %zu vehicle(s) at %.1f Hz against registry %s", fl.size(), a.rate,
            a.registry.c_str());
  install_signals();
  wait_for_signal();
  fl.stop();
  auto c = fl.counters();
  log::info("sim: logins=%llu login_failures=%llu frames=%llu handovers=%llu "
            "noops=%llu failures=%llu reconnects=%llu",
            (unsigned long long)c.logins, (unsigned long long)c.login_failures,
            (unsigned long long)c.frames, (unsigned long long)c.handovers,
            (unsigned long long)c.handover_noops, (unsigned long long)c.handover_failures,
            (unsigned long long)c.reconnects);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"edge dynamic map toolkit: broker, registry, MEC server, fleet simulator, benchmarks"};
  app.require_subcommand(1);

  // broker
  auto* broker_cmd = app.add_subcommand("broker", "run a standalone pub/sub broker");
  std::string b_listen;
  size_t b_max_payload = bus::kDefaultMaxPayload;
  broker_cmd->add_option("--listen", b_listen, "bind address HOST:PORT")->required();
  broker_cmd->add_option("--max-payload", b_max_payload, "largest accepted payload in bytes");

  // registry
  auto* reg_cmd = app.add_subcommand("registry", "run the MEC registry");
  std::string r_listen, r_snapshot, r_id = "mec_registry_id";
  reg_cmd->add_option("--listen", r_listen, "bind address HOST:PORT")->required();
  reg_cmd->add_option("--snapshot", r_snapshot, "periodic state snapshot file (empty disables)");
  reg_cmd->add_option("--registry-id", r_id, "login topic prefix");

  // mec (+ dump)
  auto* mec_cmd = app.add_subcommand("mec", "run a MEC server with embedded broker and map store");
  MecArgs ma;
  auto* o_id = mec_cmd->add_option("--id", ma.id, "MEC identifier");
  auto* o_lat = mec_cmd->add_option("--lat", ma.lat, "server latitude");
  auto* o_lon = mec_cmd->add_option("--lon", ma.lon, "server longitude");
  mec_cmd->add_option("--r-opt", ma.r_opt, "optimal coverage radius in metres");
  mec_cmd->add_option("--r-oper", ma.r_oper, "operating coverage radius in metres");
  auto* o_broker = mec_cmd->add_option("--broker", ma.broker, "own broker bind address HOST:PORT");
  mec_cmd->add_option("--registry", ma.registry, "registry broker HOST:PORT (omit for standalone)");
  mec_cmd->add_option("--t-buffer-ms", ma.t_buffer_ms, "flush period / buffering budget");
  mec_cmd->add_option("--retention-ms", ma.retention_ms, "store retention window");
  mec_cmd->add_option("--grid-origin", ma.grid_origin, "projection center LAT,LON (default: server position)");
  mec_cmd->add_option("--cell-area", ma.cell_area, "hexagon cell area in square metres");

  auto* dump_cmd = mec_cmd->add_subcommand("dump", "print a running MEC's live rows");
  std::string d_broker, d_id = "mec1";
  bool d_csv = false;
  dump_cmd->add_option("--broker", d_broker, "target MEC broker HOST:PORT")->required();
  dump_cmd->add_option("--id", d_id, "target MEC identifier");
  dump_cmd->add_flag("--csv", d_csv, "CSV output (the only format; accepted for clarity)");

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "drive a vehicle fleet against a deployment");
  SimArgs sa;
  sim_cmd->add_option("--registry", sa.registry, "registry broker HOST:PORT")->required();
  sim_cmd->add_option("--mode", sa.mode, "traffic model")
      ->check(CLI::IsMember({"synthetic", "fcd"}));
  sim_cmd->add_option("--n", sa.n, "vehicle count (synthetic)");
  sim_cmd->add_option("--bbox", sa.bbox, "lat_min,lat_max,lon_min,lon_max (synthetic)");
  sim_cmd->add_option("--seed", sa.seed, "deterministic stream seed");
  sim_cmd->add_option("--rate", sa.rate, "CAM rate per vehicle in Hz [1,10]");
  sim_cmd->add_option("--t-send-ms", sa.t_send_ms, "artificial uplink delay");
  sim_cmd->add_option("--file", sa.file, "SUMO FCD export (fcd mode)");
  sim_cmd->add_flag("--loop", sa.loop, "restart the FCD replay at the end");
  sim_cmd->add_option("--grid-origin", sa.grid_origin, "projection center LAT,LON");
  sim_cmd->add_option("--cell-area", sa.cell_area, "hexagon cell area in square metres");
  sim_cmd->add_option("--workers", sa.workers, "agent worker threads");

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "reproduce the measurement suite");
  bench_cmd->require_subcommand(1);
  std::string out_dir;
  std::string batches = "100,1000,2500,5000,10000";
  size_t reps = 1000, cells = 20;
  uint64_t bench_seed = 1;

  auto* bi = bench_cmd->add_subcommand("insert", "decode+insert cost per batch size");
  bi->add_option("--out", out_dir, "output directory")->required();
  bi->add_option("--reps", reps, "repetitions per batch size (>= 30)");
  bi->add_option("--batches", batches, "comma-separated batch sizes");
  bi->add_option("--cells", cells, "cells the stations spread over");
  bi->add_option("--seed", bench_seed, "corpus seed");

  auto* bq = bench_cmd->add_subcommand("query", "latency of the five query shapes");
  bq->add_option("--out", out_dir, "output directory")->required();
  bq->add_option("--reps", reps, "repetitions per batch size (>= 30)");
  bq->add_option("--batches", batches, "comma-separated batch sizes");
  bq->add_option("--cells", cells, "cells the stations spread over");
  bq->add_option("--seed", bench_seed, "corpus seed");

  auto* bc = bench_cmd->add_subcommand("capacity", "full-stack load and availability run");
  size_t c_vehicles = 2000;
  double c_rate = 10.0;
  uint64_t c_tbuf = 50, c_duration = 60, c_seed = 1;
  bc->add_option("--out", out_dir, "output directory")->required();
  bc->add_option("--vehicles", c_vehicles, "synthetic vehicle count");
  bc->add_option("--rate", c_rate, "CAM rate per vehicle in Hz [1,10]");
  bc->add_option("--t-buffer-ms", c_tbuf, "MEC flush period");
  bc->add_option("--duration", c_duration, "measured window in seconds");
  bc->add_option("--seed", c_seed, "fleet seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (broker_cmd->parsed()) return run_broker(b_listen, b_max_payload);
    if (reg_cmd->parsed()) return run_registry(r_listen, r_snapshot, r_id);
    if (mec_cmd->parsed()) {
      if (dump_cmd->parsed()) return run_mec_dump(d_broker, d_id);
      for (auto* req : {o_id, o_lat, o_lon, o_broker})
        if (req->count() == 0)
          throw CLI::RequiredError("mec: --id, --lat, --lon and --broker");
      return run_mec(ma);
    }
    if (sim_cmd->parsed()) return run_sim(sa);
    if (bench_cmd->parsed()) {
      bench::BenchConfig cfg;
      cfg.batch_sizes = parse_batches(batches);
      cfg.repetitions = reps;
      cfg.n_cells = cells;
      cfg.seed = bench_seed;
      if (bi->parsed()) {
        auto rows = bench::run_insertion_bench(cfg);
        auto paths = bench::write_insertion_outputs(rows, cfg, out_dir);
        for (const auto& p : paths) log::info("wrote %s", p.c_str());
        std::fputs(bench::render_insertion_csv(rows, cfg).c_str(), stdout);
        return 0;
      }
      if (bq->parsed()) {
        auto rows = bench::run_query_bench(cfg);
        auto paths = bench::write_query_outputs(rows, cfg, out_dir);
        for (const auto& p : paths) log::info("wrote %s", p.c_str());
        std::fputs(bench::render_query_csv(rows, cfg).c_str(), stdout);
        return 0;
      }
      bench::CapacityConfig ccfg;
      ccfg.n_vehicles = c_vehicles;
      ccfg.rate_hz = c_rate;
      ccfg.t_buffer_ms = c_tbuf;
      ccfg.duration_s = c_duration;
      ccfg.seed = c_seed;
      auto report = bench::run_capacity_bench(ccfg);
      auto paths = bench::write_capacity_outputs(report, out_dir);
      for (const auto& p : paths) log::info("wrote %s", p.c_str());
      std::fputs(bench::render_capacity_csv(report).c_str(), stdout);
      return 0;
    }
  } catch (const CLI::Error& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    log::error("%s", e.what());
    return 1;
  }
  return 1;
}
