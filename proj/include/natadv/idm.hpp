#pragma once

#include <span>
#include <vector>

#include <json.hpp>

namespace natadv {

// Intelligent Driver Model parameters. Defaults are the calibrated values
// shipped with the toolkit (a=2, v0=10, delta=4, s0=1, b=1, T=0.5).
struct IdmParameters {
  double a_max = 2.0;       // m/s^2
  double v_desired = 10.0;  // m/s
  double delta = 4.0;
  double s0 = 1.0;          // m
  double b_comfort = 1.0;   // m/s^2
  double headway_T = 0.5;   // s

  void validate() const;
  bool operator==(const IdmParameters&) const = default;
};

nlohmann::json to_json(const IdmParameters& p);
IdmParameters idm_from_json(const nlohmann::json& j);

// Desired dynamic gap s*(v, dv); dv is follower minus leader speed. The
// dynamic term may be negative.
double idm_desired_gap(const IdmParameters& p, double v, double dv);

// Throws DomainError when gap <= 0.
double idm_acceleration(const IdmParameters& p, double v, double dv, double gap);

// Acceleration on an empty road (gap -> infinity).
double idm_free_acceleration(const IdmParameters& p, double v);

// Gap at which a follower at speed v behind an equally fast leader keeps
// zero acceleration; requires 0 <= v < v_desired.
double idm_equilibrium_gap(const IdmParameters& p, double v);

inline constexpr double kIdmGapFloor = 0.01;

// Leader motion along the lane: rear-bumper position and speed per sample.
struct LeaderTrajectory {
  std::vector<double> rear_position;
  std::vector<double> speed;
};

// Forward-Euler IDM follower behind a recorded leader. Returns the bumper gap
// at every leader sample (element 0 is the initial gap). The gap fed to the
// model is floored at 1 cm.
std::vector<double> simulate_idm_follower(const IdmParameters& p, const LeaderTrajectory& leader,
                                          double follower_front_position, double follower_speed,
                                          double dt);

}  // namespace natadv
