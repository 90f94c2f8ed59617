#include "natadv/lane_query.hpp"

namespace natadv {

LaneSurroundings lane_surroundings(const WorldState& world, std::size_t lane_index,
                                   const VehicleState& self) {
  LaneSurroundings out;
  if (!world.road || lane_index >= world.road->lanes.size()) return out;
  const auto& lane = world.road->lanes[lane_index];
  const double s_self = project_onto_lane(lane, self.position).s;
  double best_ahead = 0.0, best_behind = 0.0;
  for (const auto& v : world.vehicles) {
    if (v.id == self.id || v.lane != lane.id) continue;
    const double s = project_onto_lane(lane, v.position).s;
    const double ds = s - s_self;
    const bool ahead = ds > 0.0 || (ds == 0.0 && v.id > self.id);
    const double gap = std::abs(ds) - 0.5 * (v.length + self.length);
    if (ahead) {
      if (!out.leader || ds < best_ahead) {
        out.leader = LaneNeighbor{&v, gap};
        best_ahead = ds;
      }
    } else {
      if (!out.follower || ds > best_behind) {
        out.follower = LaneNeighbor{&v, gap};
        best_behind = ds;
      }
    }
  }
  return out;
}

}  // namespace natadv
