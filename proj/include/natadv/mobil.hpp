#pragma once

#include <json.hpp>

#include "natadv/idm.hpp"
#include "natadv/sim.hpp"

namespace natadv {

struct MobilParameters {
  double politeness_p = 0.5;
  double delta_a_th = 0.2;           // m/s^2
  double max_braking_imposed = 2.0;  // m/s^2

  void validate() const;
  bool operator==(const MobilParameters&) const = default;
};

nlohmann::json to_json(const MobilParameters& p);
MobilParameters mobil_from_json(const nlohmann::json& j);

// Accelerations around a lane change: current (a) and after-change (a~) values
// for the changing driver c, the new follower n and the old follower o.
struct LaneChangeContext {
  double a_c = 0.0, a_c_new = 0.0;
  double a_n = 0.0, a_n_new = 0.0;
  double a_o = 0.0, a_o_new = 0.0;
};

// Safety criterion: new follower's post-change acceleration stays above
// -max_braking_imposed (inclusive).
bool mobil_safety(double a_n_new, const MobilParameters& p);

double mobil_incentive_gain(const LaneChangeContext& ctx, const MobilParameters& p);

// Incentive criterion, strict: gain > delta_a_th.
bool mobil_incentive(const LaneChangeContext& ctx, const MobilParameters& p);

enum class LaneDecision { kKeep, kChangeLeft, kChangeRight };

// IDM acceleration of `follower` behind `leader` (free road when leader is
// null). Overlapping vehicles use the 1 cm gap floor.
double idm_accel_behind(const IdmParameters& idm, const VehicleState& follower,
                        const VehicleState* leader, double gap);

// Evaluates both adjacent lanes; a candidate must pass safety and incentive.
// With two passing candidates the larger gain wins; equal gains keep lane.
LaneDecision mobil_decide(const WorldState& world, VehicleId ego, const MobilParameters& p,
                          const IdmParameters& idm);

}  // namespace natadv
