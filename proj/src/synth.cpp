#include "natadv/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "natadv/error.hpp"
#include "natadv/lane_query.hpp"

namespace natadv {

std::optional<std::pair<std::size_t, std::size_t>> RecordedScene::span_of(VehicleId id) const {
  std::optional<std::pair<std::size_t, std::size_t>> span;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const bool present = std::any_of(frames[f].vehicles.begin(), frames[f].vehicles.end(),
                                     [&](const VehicleState& v) { return v.id == id; });
    if (!present) continue;
    if (!span) span = std::pair{f, f};
    else span->second = f;
  }
  return span;
}

std::vector<VehicleId> RecordedScene::vehicle_ids() const {
  std::set<VehicleId> ids;
  for (const auto& f : frames) {
    for (const auto& v : f.vehicles) ids.insert(v.id);
  }
  return {ids.begin(), ids.end()};
}

RecordedScene scene_from_episodes(const std::vector<Episode>& episodes,
                                  std::shared_ptr<const RoadNetwork> road, double wheelbase) {
  RecordedScene scene;
  scene.road = road;
  scene.dt = kFrameDt;
  if (episodes.empty()) return scene;

  std::int64_t first = std::numeric_limits<std::int64_t>::max();
  std::int64_t last = std::numeric_limits<std::int64_t>::min();
  for (const auto& ep : episodes) {
    if (ep.records.empty()) continue;
    first = std::min(first, ep.records.front().frame);
    last = std::max(last, ep.records.back().frame);
  }
  if (first > last) return scene;
  scene.frames.resize(static_cast<std::size_t>(last - first + 1));
  for (std::size_t f = 0; f < scene.frames.size(); ++f) scene.frames[f].step = static_cast<std::int64_t>(f);

  for (const auto& ep : episodes) {
    const auto& recs = ep.records;
    const std::size_t n = recs.size();
    std::vector<double> heading(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i == 0 ? 0 : i - 1;
      const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
      const double dx = recs[hi].x - recs[lo].x;
      const double dy = recs[hi].y - recs[lo].y;
      if (std::hypot(dx, dy) > 1e-6) {
        heading[i] = std::atan2(dy, dx);
      } else if (i > 0) {
        heading[i] = heading[i - 1];
      } else if (road) {
        if (auto li = nearest_lane(*road, {recs[i].x, recs[i].y}, 1e9)) {
          heading[i] = project_onto_lane(road->lanes[*li], {recs[i].x, recs[i].y}).heading;
        }
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = recs[i];
      VehicleState v;
      v.id = r.vehicle_id;
      v.position = {r.x, r.y};
      v.heading = heading[i];
      v.speed = r.speed;
      v.length = r.length;
      v.width = r.width;
      v.lane = r.lane_id;
      if (road) {
        const auto idx = locate_lane(*road, v.position);
        v.lane = idx ? std::optional<int>(road->lanes[*idx].id) : std::nullopt;
      }
      ControlAction a;
      a.acceleration = r.accel;
      if (i + 1 < n && r.speed > 0.5) {
        const double yaw_rate = wrap_angle(heading[i + 1] - heading[i]) / scene.dt;
        const double sin_beta = std::clamp(yaw_rate * 0.5 * wheelbase / r.speed, -1.0, 1.0);
        a.steering = std::atan(2.0 * std::tan(std::asin(sin_beta)));
      }
      auto& frame = scene.frames[static_cast<std::size_t>(r.frame - first)];
      frame.vehicles.push_back(v);
      frame.controls[v.id] = a;
    }
  }
  for (auto& f : scene.frames) {
    std::sort(f.vehicles.begin(), f.vehicles.end(),
              [](const VehicleState& a, const VehicleState& b) { return a.id < b.id; });
  }
  return scene;
}

std::vector<Episode> episodes_from_scene(const RecordedScene& scene, DataSource source) {
  std::map<VehicleId, Episode> eps;
  for (const auto& frame : scene.frames) {
    WorldState w;
    w.vehicles = frame.vehicles;
    w.road = scene.road;
    for (const auto& v : frame.vehicles) {
      TrajectoryRecord r;
      r.vehicle_id = v.id;
      r.frame = frame.step;
      r.x = v.position.x;
      r.y = v.position.y;
      r.speed = v.speed;
      const auto it = frame.controls.find(v.id);
      r.accel = it == frame.controls.end() ? 0.0 : it->second.acceleration;
      r.lane_id = v.lane;
      r.length = v.length;
      r.width = v.width;
      r.vehicle_class = 2;
      if (v.lane && scene.road) {
        if (auto idx = scene.road->index_of(*v.lane)) {
          const auto around = lane_surroundings(w, *idx, v);
          if (around.leader) {
            r.preceding_id = around.leader->vehicle->id;
            r.space_headway = around.leader->gap;
          }
        }
      }
      auto& ep = eps[v.id];
      ep.ego_id = v.id;
      ep.source = source;
      ep.records.push_back(r);
    }
  }
  std::vector<Episode> out;
  for (auto& [id, ep] : eps) out.push_back(std::move(ep));
  return out;
}

RecordedScene simulate_traffic(const SyntheticTrafficConfig& cfg) {
  if (cfg.lanes == 0) throw SpecError("synthetic traffic needs at least one lane");
  auto road = std::make_shared<const RoadNetwork>(make_straight_road(cfg.lanes, cfg.road_length, cfg.lane_width));
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> jitter(-0.25, 0.25);
  std::uniform_real_distribution<double> hetero(1.0 - cfg.speed_heterogeneity, 1.0 + cfg.speed_heterogeneity);

  SurrogateConfig driver = cfg.driver;
  driver.wheelbase = 5.0;
  SurrogateTraffic traffic(driver);

  WorldState world;
  world.road = road;
  world.rng_seed = cfg.seed;
  VehicleId next_id = 1;
  for (std::size_t l = 0; l < cfg.lanes; ++l) {
    const double y = road->lanes[l].centerline.front().y;
    double x = 20.0 + cfg.initial_spacing * (1.0 + jitter(rng)) * 0.5 * static_cast<double>(l % 2);
    for (std::size_t k = 0; k < cfg.vehicles_per_lane; ++k) {
      VehicleState v;
      v.id = next_id++;
      v.position = {x, y};
      v.speed = cfg.initial_speed * (1.0 + 0.5 * jitter(rng));
      world.vehicles.push_back(v);
      IdmParameters p = driver.idm;
      p.v_desired *= hetero(rng);
      traffic.set_idm(v.id, p);
      x += cfg.initial_spacing * (1.0 + jitter(rng));
    }
  }
  relocate_lanes(world);

  SimConfig sim;
  sim.dt = kFrameDt;
  sim.wheelbase = driver.wheelbase;
  const auto steps = static_cast<std::size_t>(std::llround(cfg.duration_s / sim.dt));

  RecordedScene scene;
  scene.road = road;
  scene.dt = sim.dt;
  scene.frames.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    auto controls = traffic.controls(world, {}, &rng);
    scene.frames.push_back(StepSnapshot{world.step_index, world.vehicles, controls});
    world = step_world(world, controls, sim).first;
  }
  return scene;
}

std::vector<Episode> synthetic_episodes(const SyntheticTrafficConfig& cfg) {
  auto eps = episodes_from_scene(simulate_traffic(cfg));
  for (auto& ep : eps) {
    for (auto& r : ep.records) r.vehicle_class = cfg.vehicle_class;
  }
  if (cfg.position_noise_std > 0.0) {
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    std::normal_distribution<double> noise(0.0, cfg.position_noise_std);
    for (auto& ep : eps) {
      for (auto& r : ep.records) {
        r.x += noise(rng);
        r.y += noise(rng);
      }
    }
  }
  return eps;
}

}  // namespace natadv
