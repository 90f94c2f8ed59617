#pragma once

#include <iosfwd>
#include <map>
#include <vector>

#include <json.hpp>

#include "natadv/sim.hpp"

namespace natadv {

// World state after a step together with the controls that produced it.
struct StepSnapshot {
  std::int64_t step = 0;
  std::vector<VehicleState> vehicles;
  std::map<VehicleId, ControlAction> controls;
  bool operator==(const StepSnapshot&) const = default;
};

inline constexpr const char* kStepCsvHeader = "step,id,x,y,heading,speed,accel,steering,lane";

// One row per vehicle per step. Values use round-trip precision.
void write_step_csv(std::ostream& os, const std::vector<StepSnapshot>& steps);

nlohmann::json collision_to_json(const CollisionEvent& ev);
CollisionEvent collision_from_json(const nlohmann::json& j);
void write_collisions_jsonl(std::ostream& os, const std::vector<CollisionEvent>& events);

nlohmann::json vehicle_to_json(const VehicleState& v);
VehicleState vehicle_from_json(const nlohmann::json& j);

Side side_from_string(const std::string& s);

}  // namespace natadv
