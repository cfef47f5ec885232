#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "snpd/geometry.hpp"
#include "snpd/protocol.hpp"
#include "snpd/rng.hpp"

namespace snpd {

struct Snapshot {
  double t = 0;  // seconds
  std::map<NodeId, Position> positions;
};

// Positions sampled at a fixed time step.  Every snapshot carries the same
// node id set: cars neither appear nor vanish mid-trace, which keeps
// per-node behavior assignments stable for a whole run.
struct MobilityTrace {
  double step_seconds = 1.0;
  std::vector<Snapshot> snapshots;

  std::size_t node_count() const {
    return snapshots.empty() ? 0 : snapshots.front().positions.size();
  }
};

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace tdetail {

[[noreturn]] inline void fail(std::size_t line, const std::string& what) {
  throw TraceError("trace line " + std::to_string(line) + ": " + what);
}

}  // namespace tdetail

// Text form: one header line `snpd-trace v1 <step_seconds> <node_count>`,
// then one line `t node_id x y` per node per snapshot, sorted by
// (t, node_id).  Times in seconds, coordinates in meters.
inline MobilityTrace load_trace(std::istream& in) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) tdetail::fail(line_no, "missing header");

  std::istringstream head(line);
  std::string magic, version;
  double step = 0;
  std::size_t count = 0;
  if (!(head >> magic >> version >> step >> count) || magic != "snpd-trace" ||
      version != "v1")
    tdetail::fail(line_no, "bad header, expected `snpd-trace v1 <step> <n>`");
  if (!(step > 0)) tdetail::fail(line_no, "step must be positive");
  if (count == 0) tdetail::fail(line_no, "node count must be positive");

  MobilityTrace trace;
  trace.step_seconds = step;

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    double t = 0, x = 0, y = 0;
    NodeId id = 0;
    if (!(row >> t >> id >> x >> y))
      tdetail::fail(line_no, "expected `t node_id x y`");
    std::string extra;
    if (row >> extra) tdetail::fail(line_no, "trailing fields");

    if (trace.snapshots.empty() || t != trace.snapshots.back().t) {
      if (!trace.snapshots.empty() && t < trace.snapshots.back().t)
        tdetail::fail(line_no, "non-monotone time");
      if (!trace.snapshots.empty() &&
          trace.snapshots.back().positions.size() != count)
        tdetail::fail(line_no, "snapshot is missing nodes");
      trace.snapshots.push_back({t, {}});
    }
    auto& snap = trace.snapshots.back();
    if (snap.positions.count(id)) tdetail::fail(line_no, "duplicate node id");
    if (!snap.positions.empty() && id < snap.positions.rbegin()->first)
      tdetail::fail(line_no, "node ids out of order");
    snap.positions.emplace(id, Position{x, y});
  }

  ++line_no;
  if (trace.snapshots.empty()) tdetail::fail(line_no, "no snapshots");
  if (trace.snapshots.back().positions.size() != count)
    tdetail::fail(line_no, "snapshot is missing nodes");
  for (std::size_t i = 1; i < trace.snapshots.size(); ++i) {
    const auto& a = trace.snapshots[i - 1].positions;
    const auto& b = trace.snapshots[i].positions;
    for (auto ia = a.begin(), ib = b.begin(); ia != a.end(); ++ia, ++ib)
      if (ia->first != ib->first)
        throw TraceError("node id set changes between snapshots");
  }
  return trace;
}

inline MobilityTrace load_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file: " + path);
  return load_trace(in);
}

inline void write_trace(std::ostream& out, const MobilityTrace& trace) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "snpd-trace v1 %.6g %zu\n",
                trace.step_seconds,
                trace.snapshots.empty() ? std::size_t{0}
                                        : trace.snapshots.front().positions.size());
  out << buf;
  for (const auto& snap : trace.snapshots) {
    for (const auto& [id, pos] : snap.positions) {
      std::snprintf(buf, sizeof buf, "%.6g %u %.3f %.3f\n", snap.t, id, pos.x,
                    pos.y);
      out << buf;
    }
  }
}

inline void write_trace_file(const std::string& path,
                             const MobilityTrace& trace) {
  std::ofstream out(path);
  if (!out) throw TraceError("cannot open trace file for writing: " + path);
  write_trace(out, trace);
}

enum class MobilityModel { GridRoads, RandomWaypoint, Static };

struct SynthConfig {
  MobilityModel model = MobilityModel::GridRoads;
  double area_width = 5000.0;   // meters
  double area_height = 5000.0;  // meters
  int node_count = 300;
  int snapshot_count = 60;
  double step_seconds = 1.0;
  double speed_min = 8.0;   // m/s
  double speed_max = 15.0;  // m/s
  double road_spacing = 500.0;  // grid model only

  bool valid() const {
    return area_width > 0 && area_height > 0 && node_count > 0 &&
           snapshot_count > 0 && step_seconds > 0 && speed_min >= 0 &&
           speed_max >= speed_min &&
           road_spacing > 0 && road_spacing <= area_width &&
           road_spacing <= area_height;
  }
};

namespace tdetail {

// A car on a rectangular road grid: it drives along one axis on a road of
// the other axis and may turn at intersections.  Edges bounce.
struct GridCar {
  bool horizontal = true;  // moving along x on a horizontal road
  Position pos;
  double dir = 1.0;
  double speed = 10.0;
};

inline double snap_to_grid(double v, double spacing, double limit) {
  const double k = std::round(v / spacing);
  return std::min(limit, std::max(0.0, k * spacing));
}

inline void advance_grid_car(GridCar& car, double dt, double spacing,
                             double width, double height, Rng& rng) {
  double remaining = car.speed * dt;
  for (int guard = 0; guard < 64 && remaining > 1e-9; ++guard) {
    double& along = car.horizontal ? car.pos.x : car.pos.y;
    const double limit = car.horizontal ? width : height;

    // Next decision point: an intersection or the area edge.
    const double next =
        car.dir > 0
            ? std::min(limit,
                       (std::floor(along / spacing + 1e-9) + 1) * spacing)
            : std::max(0.0, (std::ceil(along / spacing - 1e-9) - 1) * spacing);
    const double gap = std::abs(next - along);
    if (remaining < gap) {
      along += car.dir * remaining;
      return;
    }
    along = next;
    remaining -= gap;

    const bool at_edge = along <= 0.0 || along >= limit;
    // A crossing road exists only where the reached coordinate is on the
    // grid; an off-grid edge (area width not a multiple of the spacing)
    // can only bounce.
    const bool on_grid =
        std::abs(along - std::round(along / spacing) * spacing) < 1e-6;
    const double choice = rng.uniform();
    if (at_edge && (!on_grid || choice < 0.25)) {
      car.dir = -car.dir;
      continue;
    }
    if (!at_edge && choice < 0.5) continue;  // straight through

    // Turn onto the crossing road; an edge row forces the inward direction.
    car.horizontal = !car.horizontal;
    const double new_along = car.horizontal ? car.pos.x : car.pos.y;
    const double new_limit = car.horizontal ? width : height;
    if (new_along <= 0.0)
      car.dir = 1.0;
    else if (new_along >= new_limit)
      car.dir = -1.0;
    else
      car.dir = rng.uniform() < 0.5 ? 1.0 : -1.0;
  }
}

}  // namespace tdetail

// Deterministic synthetic mobility, a desk-scale stand-in for recorded
// vehicle traces.
inline MobilityTrace synth_trace(const SynthConfig& cfg, Rng& rng) {
  if (!cfg.valid()) throw TraceError("invalid synthetic trace config");

  MobilityTrace trace;
  trace.step_seconds = cfg.step_seconds;
  const auto speed = [&] {
    return cfg.speed_max > cfg.speed_min
               ? rng.uniform(cfg.speed_min, cfg.speed_max)
               : cfg.speed_min;
  };

  if (cfg.model == MobilityModel::Static) {
    Snapshot first;
    first.t = 0;
    for (int i = 0; i < cfg.node_count; ++i)
      first.positions.emplace(static_cast<NodeId>(i + 1),
                              Position{rng.uniform(0, cfg.area_width),
                                       rng.uniform(0, cfg.area_height)});
    for (int s = 0; s < cfg.snapshot_count; ++s) {
      Snapshot snap = first;
      snap.t = s * cfg.step_seconds;
      trace.snapshots.push_back(std::move(snap));
    }
    return trace;
  }

  if (cfg.model == MobilityModel::RandomWaypoint) {
    struct Car {
      Position pos, target;
      double speed;
    };
    std::vector<Car> cars;
    for (int i = 0; i < cfg.node_count; ++i) {
      Car c;
      c.pos = {rng.uniform(0, cfg.area_width), rng.uniform(0, cfg.area_height)};
      c.target = {rng.uniform(0, cfg.area_width),
                  rng.uniform(0, cfg.area_height)};
      c.speed = speed();
      cars.push_back(c);
    }
    for (int s = 0; s < cfg.snapshot_count; ++s) {
      Snapshot snap;
      snap.t = s * cfg.step_seconds;
      for (int i = 0; i < cfg.node_count; ++i)
        snap.positions.emplace(static_cast<NodeId>(i + 1), cars[i].pos);
      trace.snapshots.push_back(std::move(snap));
      for (auto& c : cars) {
        double remaining = c.speed * cfg.step_seconds;
        while (remaining > 1e-9) {
          const double gap = distance(c.pos, c.target);
          if (gap > remaining) {
            c.pos.x += (c.target.x - c.pos.x) * remaining / gap;
            c.pos.y += (c.target.y - c.pos.y) * remaining / gap;
            break;
          }
          c.pos = c.target;
          remaining -= gap;
          c.target = {rng.uniform(0, cfg.area_width),
                      rng.uniform(0, cfg.area_height)};
          c.speed = speed();
        }
      }
    }
    return trace;
  }

  // Grid roads.
  std::vector<tdetail::GridCar> cars;
  for (int i = 0; i < cfg.node_count; ++i) {
    tdetail::GridCar c;
    c.horizontal = rng.uniform() < 0.5;
    if (c.horizontal) {
      c.pos.x = rng.uniform(0, cfg.area_width);
      c.pos.y = tdetail::snap_to_grid(rng.uniform(0, cfg.area_height),
                                      cfg.road_spacing, cfg.area_height);
    } else {
      c.pos.x = tdetail::snap_to_grid(rng.uniform(0, cfg.area_width),
                                      cfg.road_spacing, cfg.area_width);
      c.pos.y = rng.uniform(0, cfg.area_height);
    }
    c.dir = rng.uniform() < 0.5 ? 1.0 : -1.0;
    c.speed = speed();
    cars.push_back(c);
  }
  for (int s = 0; s < cfg.snapshot_count; ++s) {
    Snapshot snap;
    snap.t = s * cfg.step_seconds;
    for (int i = 0; i < cfg.node_count; ++i)
      snap.positions.emplace(static_cast<NodeId>(i + 1), cars[i].pos);
    trace.snapshots.push_back(std::move(snap));
    for (auto& c : cars)
      tdetail::advance_grid_car(c, cfg.step_seconds, cfg.road_spacing,
                                cfg.area_width, cfg.area_height, rng);
  }
  return trace;
}

// Symmetric adjacency on true positions: neighbors are everyone within R.
inline std::map<NodeId, std::vector<NodeId>> neighbor_graph(
    const Snapshot& snap, double range) {
  std::map<NodeId, std::vector<NodeId>> adj;
  for (const auto& [id, pos] : snap.positions) adj[id];
  for (auto a = snap.positions.begin(); a != snap.positions.end(); ++a) {
    auto b = a;
    for (++b; b != snap.positions.end(); ++b) {
      if (distance(a->second, b->second) <= range) {
        adj[a->first].push_back(b->first);
        adj[b->first].push_back(a->first);
      }
    }
  }
  return adj;
}

}  // namespace snpd
