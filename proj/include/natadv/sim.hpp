#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "natadv/geometry.hpp"
#include "natadv/road.hpp"

namespace natadv {

using VehicleId = std::int64_t;

inline constexpr double kDefaultVehicleLength = 5.0;
inline constexpr double kDefaultVehicleWidth = 2.0;

struct VehicleState {
  VehicleId id = 0;
  Vec2 position;
  double heading = 0.0;
  double speed = 0.0;
  double length = kDefaultVehicleLength;
  double width = kDefaultVehicleWidth;
  std::optional<int> lane;  // lane id, none when off every lane

  Vec2 velocity() const { return unit_from_heading(heading) * speed; }
  bool operator==(const VehicleState&) const = default;
};

struct ControlAction {
  double acceleration = 0.0;
  double steering = 0.0;
  bool operator==(const ControlAction&) const = default;
};

struct ActionBounds {
  double accel_min;
  double accel_max;
  double steering_min;
  double steering_max;

  ControlAction clamp(const ControlAction& a) const;
  bool contains(const ControlAction& a) const;
};

// Human-driving envelope used for expert data and the surrogate traffic.
inline constexpr ActionBounds kExpertBounds{-5.0, 3.0, -std::numbers::pi / 3, std::numbers::pi / 3};
// Envelope of the adversarial agent; wider than any observed adversarial extreme.
inline constexpr ActionBounds kAdversarialBounds{-12.0, 12.0, -std::numbers::pi, std::numbers::pi};

struct SimConfig {
  double dt = 0.1;
  int horizon_steps = 100;
  bool offroad_terminates = true;
  double wheelbase = 5.0;

  void validate() const;
};

struct WorldState {
  double time = 0.0;
  std::int64_t step_index = 0;
  std::vector<VehicleState> vehicles;
  std::shared_ptr<const RoadNetwork> road;
  std::uint64_t rng_seed = 0;

  const VehicleState* find(VehicleId id) const;
  VehicleState* find(VehicleId id);
  // Throws NotFoundError.
  const VehicleState& at(VehicleId id) const;
};

enum class Side { kFront, kRear, kLeft, kRight };
std::string to_string(Side s);

struct LatLon {
  double lateral = 0.0;
  double longitudinal = 0.0;
  bool operator==(const LatLon&) const = default;
};

struct CollisionEvent {
  std::int64_t step_index = 0;
  std::pair<VehicleId, VehicleId> ids;
  std::pair<Side, Side> contact_sides;  // side of first / second vehicle that was hit
  double relative_heading = 0.0;        // heading(second) - heading(first), wrapped
  LatLon relative_velocity;             // second relative to first, first's body frame
  LatLon relative_position;             // second relative to first, first's body frame

  bool involves(VehicleId id) const { return ids.first == id || ids.second == id; }
  std::optional<VehicleId> other(VehicleId id) const;
  bool operator==(const CollisionEvent&) const = default;
};

enum class Termination { kEgoCollision, kOffRoad, kHorizon };
std::string to_string(Termination t);

// Kinematic bicycle, forward Euler. Throws InvalidStateError on non-finite input.
VehicleState step_vehicle(const VehicleState& state, const ControlAction& action,
                          const SimConfig& cfg);

// Advances every vehicle from the previous-step states, re-locates lanes on
// the world's road and reports all overlapping pairs of the new state.
std::pair<WorldState, std::vector<CollisionEvent>> step_world(
    const WorldState& world, const std::map<VehicleId, ControlAction>& controls,
    const SimConfig& cfg);

// Separating-axis test on the two footprints.
std::optional<CollisionEvent> detect_collision(const VehicleState& a, const VehicleState& b);

// Side of `self` facing a point given in world coordinates.
Side facing_side(const VehicleState& self, const Vec2& point);

// Vehicles within `radius` (closed ball) of the ego, sorted by distance then id.
std::vector<std::pair<VehicleId, double>> neighbors(const WorldState& world, VehicleId ego,
                                                    double radius);

// (lateral, longitudinal, lateral speed, longitudinal speed, relative heading)
// of `other` in the body frame of `ego`; lateral is left-positive.
using RelativeFeatures = std::array<double, 5>;
RelativeFeatures relative_features(const VehicleState& ego, const VehicleState& other);

std::optional<Termination> episode_done(const WorldState& world, VehicleId ego,
                                        const std::vector<CollisionEvent>& events,
                                        const SimConfig& cfg);

// Assigns lane ids from the road (none when off every lane).
void relocate_lanes(WorldState& world);

}  // namespace natadv
