#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "natadv/geometry.hpp"

namespace natadv {

enum class LaneKind { kMainline, kAuxiliary };

struct Lane {
  int id = 0;
  LaneKind kind = LaneKind::kMainline;
  double width = 3.7;
  std::vector<Vec2> centerline;
  std::vector<double> arc;  // cumulative length at each centerline vertex
  std::optional<std::size_t> left;
  std::optional<std::size_t> right;

  double length() const { return arc.empty() ? 0.0 : arc.back(); }
};

// Lanes are indexed left to right; the highest index is the far-right lane.
struct RoadNetwork {
  std::vector<Lane> lanes;

  std::size_t lane_count() const { return lanes.size(); }
  // Index of the lane with the given id, or nullopt.
  std::optional<std::size_t> index_of(int lane_id) const;
  bool is_far_right_or_ramp(int lane_id) const;
};

struct LaneProjection {
  double s = 0.0;        // arc length of the foot point
  double lateral = 0.0;  // signed offset, left positive
  double heading = 0.0;  // centerline direction at the foot point
  bool inside = false;   // foot point lies strictly within the polyline span
};

LaneProjection project_onto_lane(const Lane& lane, const Vec2& p);

// Lane whose drivable strip (|lateral| <= width/2) contains p. Nearest
// centerline wins; ties go to the lower index.
std::optional<std::size_t> locate_lane(const RoadNetwork& road, const Vec2& p);

// Nearest centerline by |lateral| regardless of the drivable strip. Returns
// nullopt when p is farther than `max_widths` lane widths from all of them.
std::optional<std::size_t> nearest_lane(const RoadNetwork& road, const Vec2& p,
                                        double max_widths = 2.0);

// Road description: either explicit lanes made of straight segments and
// circular arcs, or a block of parallel straight lanes.
//
//   {"parallel": {"lanes": 5, "length": 640, "width": 3.7,
//                 "auxiliary": [5], "extra_lanes": 1}}
//   {"lanes": [{"id": 0, "width": 3.5, "kind": "mainline",
//               "start": {"x": 0, "y": 0, "heading": 0},
//               "segments": [{"type": "straight", "length": 50},
//                            {"type": "arc", "radius": 20, "angle": 1.5708}],
//               "left": null, "right": 1}]}
RoadNetwork build_road(const nlohmann::json& spec);

// Convenience for the common case of n parallel straight lanes along +x.
// Lane i centerline sits at y = (n - 1 - i) * width.
RoadNetwork make_straight_road(std::size_t lanes, double length, double width = 3.7,
                               std::size_t auxiliary_lanes = 0);

nlohmann::json road_to_json(const RoadNetwork& road);

// Arcs are discretized so that the sagitta of every chord stays below this.
inline constexpr double kMaxChordError = 1e-3;

}  // namespace natadv
