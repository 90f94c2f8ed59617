#pragma once

#include <memory>
#include <random>
#include <vector>

#include "natadv/scenario_log.hpp"
#include "natadv/traffic.hpp"
#include "natadv/trajectory.hpp"

namespace natadv {

// A fully recorded multi-vehicle run: the world after every frame and the
// controls each vehicle applied in that frame.
struct RecordedScene {
  std::shared_ptr<const RoadNetwork> road;
  double dt = kFrameDt;
  std::vector<StepSnapshot> frames;

  // Frame index range [first, last] during which `id` is present.
  std::optional<std::pair<std::size_t, std::size_t>> span_of(VehicleId id) const;
  std::vector<VehicleId> vehicle_ids() const;
};

// Rebuilds headings and (accel, steering) controls from sampled positions.
// Steering inverts the kinematic bicycle used by the simulator.
RecordedScene scene_from_episodes(const std::vector<Episode>& episodes,
                                  std::shared_ptr<const RoadNetwork> road, double wheelbase = 5.0);

// Ground-truth annotated episodes (lane, leader, bumper headway) of a scene.
std::vector<Episode> episodes_from_scene(const RecordedScene& scene, DataSource source = DataSource::kSynthetic);

struct SyntheticTrafficConfig {
  std::size_t lanes = 3;
  double road_length = 2000.0;
  double lane_width = 3.7;
  std::size_t vehicles_per_lane = 6;
  double initial_spacing = 25.0;  // mean center spacing, meters
  double initial_speed = 8.0;
  double duration_s = 60.0;
  double speed_heterogeneity = 0.2;  // desired speed drawn from v0 * [1-h, 1+h]
  double position_noise_std = 0.0;   // measurement noise added to exported x/y
  SurrogateConfig driver;
  std::uint64_t seed = 1;
  int vehicle_class = 2;
};

// Scripted IDM/MOBIL platoons on a straight multi-lane road.
RecordedScene simulate_traffic(const SyntheticTrafficConfig& cfg);

// Synthetic corpus in the canonical episode form; measurement noise from
// cfg.position_noise_std is applied to x/y.
std::vector<Episode> synthetic_episodes(const SyntheticTrafficConfig& cfg);

}  // namespace natadv
