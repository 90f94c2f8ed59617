#include "natadv/idm.hpp"

#include <algorithm>
#include <cmath>

#include "natadv/error.hpp"

namespace natadv {

void IdmParameters::validate() const {
  if (!(a_max > 0.0 && v_desired > 0.0 && s0 > 0.0 && b_comfort > 0.0 && headway_T > 0.0)) {
    throw DomainError("IDM parameters must be positive");
  }
  if (!(delta >= 1.0)) throw DomainError("IDM exponent delta must be >= 1");
}

nlohmann::json to_json(const IdmParameters& p) {
  return {{"a_max", p.a_max},   {"v_desired", p.v_desired}, {"delta", p.delta},
          {"s0", p.s0},         {"b_comfort", p.b_comfort}, {"headway_T", p.headway_T}};
}

IdmParameters idm_from_json(const nlohmann::json& j) {
  IdmParameters p;
  p.a_max = j.value("a_max", p.a_max);
  p.v_desired = j.value("v_desired", p.v_desired);
  p.delta = j.value("delta", p.delta);
  p.s0 = j.value("s0", p.s0);
  p.b_comfort = j.value("b_comfort", p.b_comfort);
  p.headway_T = j.value("headway_T", p.headway_T);
  p.validate();
  return p;
}

double idm_desired_gap(const IdmParameters& p, double v, double dv) {
  return p.s0 + v * p.headway_T + v * dv / (2.0 * std::sqrt(p.a_max * p.b_comfort));
}

double idm_free_acceleration(const IdmParameters& p, double v) {
  return p.a_max * (1.0 - std::pow(v / p.v_desired, p.delta));
}

double idm_acceleration(const IdmParameters& p, double v, double dv, double gap) {
  if (!(gap > 0.0)) throw DomainError("IDM gap must be positive");
  const double ratio = idm_desired_gap(p, v, dv) / gap;
  return p.a_max * (1.0 - std::pow(v / p.v_desired, p.delta) - ratio * ratio);
}

double idm_equilibrium_gap(const IdmParameters& p, double v) {
  if (v < 0.0 || v >= p.v_desired) throw DomainError("equilibrium needs 0 <= v < v_desired");
  return idm_desired_gap(p, v, 0.0) / std::sqrt(1.0 - std::pow(v / p.v_desired, p.delta));
}

std::vector<double> simulate_idm_follower(const IdmParameters& p, const LeaderTrajectory& leader,
                                          double follower_front_position, double follower_speed,
                                          double dt) {
  const std::size_t n = std::min(leader.rear_position.size(), leader.speed.size());
  std::vector<double> gaps;
  gaps.reserve(n);
  double x = follower_front_position;
  double v = follower_speed;
  for (std::size_t t = 0; t < n; ++t) {
    const double gap = leader.rear_position[t] - x;
    gaps.push_back(gap);
    if (t + 1 == n) break;
    const double a = idm_acceleration(p, v, v - leader.speed[t], std::max(gap, kIdmGapFloor));
    x += v * dt;
    v = std::max(0.0, v + a * dt);
  }
  return gaps;
}

}  // namespace natadv
