#include "natadv/scenario_log.hpp"

#include <cstdio>
#include <ostream>

#include "natadv/error.hpp"

namespace natadv {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_step_csv(std::ostream& os, const std::vector<StepSnapshot>& steps) {
  os << kStepCsvHeader << '\n';
  for (const auto& s : steps) {
    for (const auto& v : s.vehicles) {
      const auto it = s.controls.find(v.id);
      const ControlAction a = it == s.controls.end() ? ControlAction{} : it->second;
      os << s.step << ',' << v.id << ',' << fmt_double(v.position.x) << ','
         << fmt_double(v.position.y) << ',' << fmt_double(v.heading) << ','
         << fmt_double(v.speed) << ',' << fmt_double(a.acceleration) << ','
         << fmt_double(a.steering) << ',';
      if (v.lane) os << *v.lane;
      os << '\n';
    }
  }
}

Side side_from_string(const std::string& s) {
  if (s == "front") return Side::kFront;
  if (s == "rear") return Side::kRear;
  if (s == "left") return Side::kLeft;
  if (s == "right") return Side::kRight;
  throw SchemaError("unknown contact side '" + s + "'");
}

json collision_to_json(const CollisionEvent& ev) {
  return {{"step", ev.step_index},
          {"ids", {ev.ids.first, ev.ids.second}},
          {"contact_sides", {to_string(ev.contact_sides.first), to_string(ev.contact_sides.second)}},
          {"relative_heading", ev.relative_heading},
          {"relative_velocity", {ev.relative_velocity.lateral, ev.relative_velocity.longitudinal}},
          {"relative_position", {ev.relative_position.lateral, ev.relative_position.longitudinal}}};
}

CollisionEvent collision_from_json(const json& j) {
  CollisionEvent ev;
  ev.step_index = j.at("step").get<std::int64_t>();
  ev.ids = {j.at("ids").at(0).get<VehicleId>(), j.at("ids").at(1).get<VehicleId>()};
  ev.contact_sides = {side_from_string(j.at("contact_sides").at(0).get<std::string>()),
                      side_from_string(j.at("contact_sides").at(1).get<std::string>())};
  ev.relative_heading = j.at("relative_heading").get<double>();
  ev.relative_velocity = {j.at("relative_velocity").at(0).get<double>(),
                          j.at("relative_velocity").at(1).get<double>()};
  ev.relative_position = {j.at("relative_position").at(0).get<double>(),
                          j.at("relative_position").at(1).get<double>()};
  return ev;
}

void write_collisions_jsonl(std::ostream& os, const std::vector<CollisionEvent>& events) {
  for (const auto& ev : events) os << collision_to_json(ev).dump() << '\n';
}

json vehicle_to_json(const VehicleState& v) {
  return {{"id", v.id},
          {"x", v.position.x},
          {"y", v.position.y},
          {"heading", v.heading},
          {"speed", v.speed},
          {"length", v.length},
          {"width", v.width},
          {"lane", v.lane ? json(*v.lane) : json(nullptr)}};
}

VehicleState vehicle_from_json(const json& j) {
  VehicleState v;
  v.id = j.at("id").get<VehicleId>();
  v.position = {j.at("x").get<double>(), j.at("y").get<double>()};
  v.heading = j.at("heading").get<double>();
  v.speed = j.at("speed").get<double>();
  v.length = j.at("length").get<double>();
  v.width = j.at("width").get<double>();
  if (!j.at("lane").is_null()) v.lane = j.at("lane").get<int>();
  return v;
}

}  // namespace natadv
