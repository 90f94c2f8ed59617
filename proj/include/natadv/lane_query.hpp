#pragma once

#include <optional>

#include "natadv/sim.hpp"

namespace natadv {

// A vehicle found along a lane relative to a reference position.
struct LaneNeighbor {
  const VehicleState* vehicle = nullptr;
  double gap = 0.0;  // bumper-to-bumper along the lane; negative when overlapping
};

struct LaneSurroundings {
  std::optional<LaneNeighbor> leader;
  std::optional<LaneNeighbor> follower;
};

// Leader and follower of a (possibly hypothetical) vehicle `self` placed in
// lane `lane_index`, among vehicles currently assigned to that lane.
// `exclude` is skipped (normally self.id).
LaneSurroundings lane_surroundings(const WorldState& world, std::size_t lane_index,
                                   const VehicleState& self);

}  // namespace natadv
