#include "natadv/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "natadv/lane_query.hpp"

namespace natadv {

namespace {
constexpr double kLateralGain = 1.0 / 0.6;
constexpr double kHeadingGain = 1.0 / 0.2;
constexpr double kMaxHeadingOffset = std::numbers::pi / 4;
}  // namespace

double lane_keeping_steering(const VehicleState& v, const Lane& lane, double wheelbase,
                             const ActionBounds& bounds) {
  const auto proj = project_onto_lane(lane, v.position);
  const double speed = std::max(v.speed, 1.0);
  const double lateral_speed_cmd = -kLateralGain * proj.lateral;
  const double heading_offset =
      std::clamp(std::asin(std::clamp(lateral_speed_cmd / speed, -1.0, 1.0)), -kMaxHeadingOffset,
                 kMaxHeadingOffset);
  const double heading_cmd = proj.heading + heading_offset;
  const double yaw_rate_cmd = kHeadingGain * wrap_angle(heading_cmd - v.heading);
  const double sin_beta = std::clamp(yaw_rate_cmd * 0.5 * wheelbase / speed, -1.0, 1.0);
  const double steering = std::atan(2.0 * std::tan(std::asin(sin_beta)));
  return std::clamp(steering, bounds.steering_min, bounds.steering_max);
}

const IdmParameters& SurrogateTraffic::idm_for(VehicleId id) const {
  const auto it = idm_override_.find(id);
  return it == idm_override_.end() ? cfg_.idm : it->second;
}

ControlAction SurrogateTraffic::control_for(const WorldState& world, const VehicleState& v,
                                            std::mt19937_64* rng) {
  ControlAction action;
  if (!world.road || world.road->lanes.empty()) return action;
  const auto& road = *world.road;
  const auto& idm = idm_for(v.id);

  std::optional<std::size_t> current =
      v.lane ? road.index_of(*v.lane) : nearest_lane(road, v.position, 1e9);
  if (!current) return action;

  auto target_it = target_lane_.find(v.id);
  if (target_it == target_lane_.end()) target_it = target_lane_.emplace(v.id, *current).first;
  std::size_t& target = target_it->second;
  if (target >= road.lanes.size()) target = *current;

  // Only consider a new change once the previous one is complete.
  if (target == *current && v.lane) {
    auto& last = last_decision_[v.id];
    if (world.time - last >= cfg_.lane_change_interval_s || world.step_index == 0) {
      last = world.time;
      const auto decision = mobil_decide(world, v.id, cfg_.mobil, idm);
      const auto& lane = road.lanes[*current];
      if (decision == LaneDecision::kChangeLeft && lane.left) target = *lane.left;
      if (decision == LaneDecision::kChangeRight && lane.right) target = *lane.right;
    }
  }

  double accel = std::numeric_limits<double>::infinity();
  for (std::size_t idx : {target, *current}) {
    const auto around = lane_surroundings(world, idx, v);
    const VehicleState* leader = around.leader ? around.leader->vehicle : nullptr;
    accel = std::min(accel, idm_accel_behind(idm, v, leader, around.leader ? around.leader->gap : 0.0));
    if (idx == *current) break;
  }
  action.acceleration = accel;
  action.steering = lane_keeping_steering(v, road.lanes[target], cfg_.wheelbase, cfg_.bounds);
  if (rng) {
    if (cfg_.accel_noise_std > 0.0) {
      action.acceleration += std::normal_distribution<double>(0.0, cfg_.accel_noise_std)(*rng);
    }
    if (cfg_.steering_noise_std > 0.0) {
      action.steering += std::normal_distribution<double>(0.0, cfg_.steering_noise_std)(*rng);
    }
  }
  return cfg_.bounds.clamp(action);
}

std::map<VehicleId, ControlAction> SurrogateTraffic::controls(const WorldState& world,
                                                              const std::set<VehicleId>& skip,
                                                              std::mt19937_64* rng) {
  std::map<VehicleId, ControlAction> out;
  for (const auto& v : world.vehicles) {
    if (skip.count(v.id)) continue;
    out[v.id] = control_for(world, v, rng);
  }
  return out;
}

}  // namespace natadv
