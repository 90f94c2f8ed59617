#include "natadv/sim.hpp"

#include <algorithm>
#include <cmath>

#include "natadv/error.hpp"

namespace natadv {

ControlAction ActionBounds::clamp(const ControlAction& a) const {
  return {std::clamp(a.acceleration, accel_min, accel_max),
          std::clamp(a.steering, steering_min, steering_max)};
}

bool ActionBounds::contains(const ControlAction& a) const {
  return a.acceleration >= accel_min && a.acceleration <= accel_max &&
         a.steering >= steering_min && a.steering <= steering_max;
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw InvalidStateError("SimConfig.dt must be positive");
  if (horizon_steps <= 0) throw InvalidStateError("SimConfig.horizon_steps must be positive");
  if (!(wheelbase > 0.0)) throw InvalidStateError("SimConfig.wheelbase must be positive");
}

const VehicleState* WorldState::find(VehicleId id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

VehicleState* WorldState::find(VehicleId id) {
  for (auto& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

const VehicleState& WorldState::at(VehicleId id) const {
  const auto* v = find(id);
  if (!v) throw NotFoundError("vehicle " + std::to_string(id) + " not in world");
  return *v;
}

std::string to_string(Side s) {
  switch (s) {
    case Side::kFront: return "front";
    case Side::kRear: return "rear";
    case Side::kLeft: return "left";
    case Side::kRight: return "right";
  }
  return "?";
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kEgoCollision: return "ego-collision";
    case Termination::kOffRoad: return "off-road";
    case Termination::kHorizon: return "horizon";
  }
  return "?";
}

std::optional<VehicleId> CollisionEvent::other(VehicleId id) const {
  if (ids.first == id) return ids.second;
  if (ids.second == id) return ids.first;
  return std::nullopt;
}

VehicleState step_vehicle(const VehicleState& state, const ControlAction& action,
                          const SimConfig& cfg) {
  if (!std::isfinite(state.position.x) || !std::isfinite(state.position.y) ||
      !std::isfinite(state.heading) || !std::isfinite(state.speed) ||
      !std::isfinite(action.acceleration) || !std::isfinite(action.steering)) {
    throw InvalidStateError("non-finite vehicle state or action for vehicle " +
                            std::to_string(state.id));
  }
  if (!(cfg.dt > 0.0)) throw InvalidStateError("dt must be positive");

  VehicleState next = state;
  const double beta = std::atan(0.5 * std::tan(action.steering));
  const double v = state.speed;
  next.position.x += v * cfg.dt * std::cos(state.heading + beta);
  next.position.y += v * cfg.dt * std::sin(state.heading + beta);
  next.heading = state.heading + v * std::sin(beta) / (0.5 * cfg.wheelbase) * cfg.dt;
  next.speed = std::max(0.0, v + action.acceleration * cfg.dt);
  return next;
}

void relocate_lanes(WorldState& world) {
  if (!world.road) return;
  for (auto& v : world.vehicles) {
    const auto idx = locate_lane(*world.road, v.position);
    v.lane = idx ? std::optional<int>(world.road->lanes[*idx].id) : std::nullopt;
  }
}

std::pair<WorldState, std::vector<CollisionEvent>> step_world(
    const WorldState& world, const std::map<VehicleId, ControlAction>& controls,
    const SimConfig& cfg) {
  WorldState next = world;
  for (std::size_t i = 0; i < world.vehicles.size(); ++i) {
    const auto& prev = world.vehicles[i];
    const auto it = controls.find(prev.id);
    const ControlAction action = it == controls.end() ? ControlAction{} : it->second;
    next.vehicles[i] = step_vehicle(prev, action, cfg);
  }
  relocate_lanes(next);
  next.step_index = world.step_index + 1;
  next.time = static_cast<double>(next.step_index) * cfg.dt;

  std::vector<CollisionEvent> events;
  for (std::size_t i = 0; i < next.vehicles.size(); ++i) {
    for (std::size_t j = i + 1; j < next.vehicles.size(); ++j) {
      const auto* a = &next.vehicles[i];
      const auto* b = &next.vehicles[j];
      if (b->id < a->id) std::swap(a, b);
      if (auto ev = detect_collision(*a, *b)) {
        ev->step_index = next.step_index;
        events.push_back(*ev);
      }
    }
  }
  return {std::move(next), std::move(events)};
}

namespace {

std::array<Vec2, 4> corners(const VehicleState& v) {
  const Vec2 f = unit_from_heading(v.heading) * (0.5 * v.length);
  const Vec2 l = unit_from_heading(v.heading + std::numbers::pi / 2) * (0.5 * v.width);
  return {v.position + f + l, v.position + f - l, v.position - f - l, v.position - f + l};
}

bool separated_on(const Vec2& axis, const std::array<Vec2, 4>& ca, const std::array<Vec2, 4>& cb) {
  double amin = ca[0].dot(axis), amax = amin;
  double bmin = cb[0].dot(axis), bmax = bmin;
  for (int k = 1; k < 4; ++k) {
    const double pa = ca[k].dot(axis);
    const double pb = cb[k].dot(axis);
    amin = std::min(amin, pa);
    amax = std::max(amax, pa);
    bmin = std::min(bmin, pb);
    bmax = std::max(bmax, pb);
  }
  return amax < bmin || bmax < amin;
}

LatLon body(const Vec2& v, double heading) {
  const Vec2 b = to_body_frame(v, heading);
  return {b.y, b.x};
}

}  // namespace

Side facing_side(const VehicleState& self, const Vec2& point) {
  const Vec2 rel = to_body_frame(point - self.position, self.heading);
  const double lon = rel.x / (0.5 * self.length);
  const double lat = rel.y / (0.5 * self.width);
  if (std::abs(lon) >= std::abs(lat)) return lon >= 0.0 ? Side::kFront : Side::kRear;
  return lat >= 0.0 ? Side::kLeft : Side::kRight;
}

std::optional<CollisionEvent> detect_collision(const VehicleState& a, const VehicleState& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  const std::array<Vec2, 4> axes{unit_from_heading(a.heading),
                                 unit_from_heading(a.heading + std::numbers::pi / 2),
                                 unit_from_heading(b.heading),
                                 unit_from_heading(b.heading + std::numbers::pi / 2)};
  for (const auto& axis : axes) {
    if (separated_on(axis, ca, cb)) return std::nullopt;
  }
  CollisionEvent ev;
  ev.ids = {a.id, b.id};
  ev.contact_sides = {facing_side(a, b.position), facing_side(b, a.position)};
  ev.relative_heading = wrap_angle(b.heading - a.heading);
  ev.relative_velocity = body(b.velocity() - a.velocity(), a.heading);
  ev.relative_position = body(b.position - a.position, a.heading);
  return ev;
}

std::vector<std::pair<VehicleId, double>> neighbors(const WorldState& world, VehicleId ego,
                                                    double radius) {
  const auto& e = world.at(ego);
  std::vector<std::pair<VehicleId, double>> out;
  for (const auto& v : world.vehicles) {
    if (v.id == ego) continue;
    const double d = (v.position - e.position).norm();
    if (d <= radius) out.emplace_back(v.id, d);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second < y.second : x.first < y.first;
  });
  return out;
}

RelativeFeatures relative_features(const VehicleState& ego, const VehicleState& other) {
  const LatLon p = body(other.position - ego.position, ego.heading);
  const LatLon v = body(other.velocity() - ego.velocity(), ego.heading);
  return {p.lateral, p.longitudinal, v.lateral, v.longitudinal,
          wrap_angle(other.heading - ego.heading)};
}

std::optional<Termination> episode_done(const WorldState& world, VehicleId ego,
                                        const std::vector<CollisionEvent>& events,
                                        const SimConfig& cfg) {
  for (const auto& ev : events) {
    if (ev.involves(ego)) return Termination::kEgoCollision;
  }
  if (cfg.offroad_terminates) {
    if (const auto* e = world.find(ego); e && !e->lane) return Termination::kOffRoad;
  }
  if (world.step_index >= cfg.horizon_steps) return Termination::kHorizon;
  return std::nullopt;
}

}  // namespace natadv
