#include "natadv/mobil.hpp"

#include <algorithm>
#include <optional>

#include "natadv/error.hpp"
#include "natadv/lane_query.hpp"

namespace natadv {

void MobilParameters::validate() const {
  if (!(politeness_p >= 0.0 && politeness_p <= 1.0)) throw DomainError("MOBIL politeness must be in [0, 1]");
  if (!(delta_a_th > 0.0) || !(max_braking_imposed > 0.0)) {
    throw DomainError("MOBIL thresholds must be positive");
  }
}

nlohmann::json to_json(const MobilParameters& p) {
  return {{"politeness_p", p.politeness_p},
          {"delta_a_th", p.delta_a_th},
          {"max_braking_imposed", p.max_braking_imposed}};
}

MobilParameters mobil_from_json(const nlohmann::json& j) {
  MobilParameters p;
  p.politeness_p = j.value("politeness_p", p.politeness_p);
  p.delta_a_th = j.value("delta_a_th", p.delta_a_th);
  p.max_braking_imposed = j.value("max_braking_imposed", p.max_braking_imposed);
  p.validate();
  return p;
}

bool mobil_safety(double a_n_new, const MobilParameters& p) {
  return a_n_new >= -p.max_braking_imposed;
}

double mobil_incentive_gain(const LaneChangeContext& c, const MobilParameters& p) {
  return (c.a_c_new - c.a_c) + p.politeness_p * ((c.a_n_new - c.a_n) + (c.a_o_new - c.a_o));
}

bool mobil_incentive(const LaneChangeContext& ctx, const MobilParameters& p) {
  return mobil_incentive_gain(ctx, p) > p.delta_a_th;
}

double idm_accel_behind(const IdmParameters& idm, const VehicleState& follower,
                        const VehicleState* leader, double gap) {
  if (!leader) return idm_free_acceleration(idm, follower.speed);
  return idm_acceleration(idm, follower.speed, follower.speed - leader->speed,
                          std::max(gap, kIdmGapFloor));
}

namespace {

// Bumper gap between two vehicles measured along a lane.
double gap_along(const Lane& lane, const VehicleState& rear, const VehicleState& front) {
  const double ds = project_onto_lane(lane, front.position).s - project_onto_lane(lane, rear.position).s;
  return ds - 0.5 * (rear.length + front.length);
}

struct Candidate {
  LaneDecision decision;
  double gain;
};

}  // namespace

LaneDecision mobil_decide(const WorldState& world, VehicleId ego_id, const MobilParameters& p,
                          const IdmParameters& idm) {
  const auto& ego = world.at(ego_id);
  if (!world.road || !ego.lane) return LaneDecision::kKeep;
  const auto lane_idx = world.road->index_of(*ego.lane);
  if (!lane_idx) return LaneDecision::kKeep;
  const auto& road = *world.road;
  const auto& lane = road.lanes[*lane_idx];

  const auto here = lane_surroundings(world, *lane_idx, ego);
  const VehicleState* leader = here.leader ? here.leader->vehicle : nullptr;
  const double a_c = idm_accel_behind(idm, ego, leader, here.leader ? here.leader->gap : 0.0);

  // Old follower now, and after ego leaves (following ego's current leader).
  double a_o = 0.0, a_o_new = 0.0;
  if (here.follower) {
    const auto& o = *here.follower->vehicle;
    a_o = idm_accel_behind(idm, o, &ego, here.follower->gap);
    a_o_new = leader ? idm_accel_behind(idm, o, leader, gap_along(lane, o, *leader))
                     : idm_free_acceleration(idm, o.speed);
  }

  std::optional<Candidate> best;
  for (const auto& [target, decision] :
       {std::pair{lane.left, LaneDecision::kChangeLeft}, std::pair{lane.right, LaneDecision::kChangeRight}}) {
    if (!target) continue;
    const auto there = lane_surroundings(world, *target, ego);
    // No room to slot in.
    if ((there.leader && there.leader->gap <= 0.0) || (there.follower && there.follower->gap <= 0.0)) continue;

    LaneChangeContext ctx;
    ctx.a_c = a_c;
    ctx.a_o = a_o;
    ctx.a_o_new = a_o_new;
    const VehicleState* new_leader = there.leader ? there.leader->vehicle : nullptr;
    ctx.a_c_new = idm_accel_behind(idm, ego, new_leader, there.leader ? there.leader->gap : 0.0);
    if (there.follower) {
      const auto& n = *there.follower->vehicle;
      const auto& tlane = road.lanes[*target];
      ctx.a_n = new_leader ? idm_accel_behind(idm, n, new_leader, gap_along(tlane, n, *new_leader))
                           : idm_free_acceleration(idm, n.speed);
      ctx.a_n_new = idm_accel_behind(idm, n, &ego, there.follower->gap);
    }
    if (!mobil_safety(ctx.a_n_new, p) || !mobil_incentive(ctx, p)) continue;
    const double gain = mobil_incentive_gain(ctx, p);
    if (!best || gain > best->gain) {
      best = Candidate{decision, gain};
    } else if (gain == best->gain) {
      best = Candidate{LaneDecision::kKeep, gain};
    }
  }
  return best ? best->decision : LaneDecision::kKeep;
}

}  // namespace natadv
