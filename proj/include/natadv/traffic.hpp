#pragma once

#include <map>
#include <random>
#include <set>

#include "natadv/idm.hpp"
#include "natadv/mobil.hpp"
#include "natadv/sim.hpp"

namespace natadv {

struct SurrogateConfig {
  IdmParameters idm;
  MobilParameters mobil;
  double lane_change_interval_s = 1.0;  // minimum time between MOBIL evaluations
  double accel_noise_std = 0.0;         // human variability injected on top of IDM
  double steering_noise_std = 0.0;
  ActionBounds bounds = kExpertBounds;
  double wheelbase = 5.0;
};

// Steering that tracks the centerline of `lane` (proportional lateral and
// heading loops). Clamped to `bounds`.
double lane_keeping_steering(const VehicleState& v, const Lane& lane, double wheelbase,
                             const ActionBounds& bounds);

// Rule-based background traffic: IDM longitudinal control, MOBIL lane
// selection, lane-keeping steering. Keeps per-vehicle lane targets between
// calls, so one instance drives one world.
class SurrogateTraffic {
 public:
  explicit SurrogateTraffic(SurrogateConfig cfg) : cfg_(std::move(cfg)) {}

  // Per-vehicle override of the IDM parameters (e.g. heterogeneous desired speeds).
  void set_idm(VehicleId id, const IdmParameters& p) { idm_override_[id] = p; }
  void reset() {
    target_lane_.clear();
    last_decision_.clear();
  }

  // Controls for every vehicle except those in `skip`. Noise is drawn from
  // `rng` when the config asks for it.
  std::map<VehicleId, ControlAction> controls(const WorldState& world, const std::set<VehicleId>& skip,
                                              std::mt19937_64* rng = nullptr);

  // Accel/steering for one vehicle (updates its lane target).
  ControlAction control_for(const WorldState& world, const VehicleState& v, std::mt19937_64* rng = nullptr);

  const SurrogateConfig& config() const { return cfg_; }

 private:
  const IdmParameters& idm_for(VehicleId id) const;

  SurrogateConfig cfg_;
  std::map<VehicleId, IdmParameters> idm_override_;
  std::map<VehicleId, std::size_t> target_lane_;
  std::map<VehicleId, double> last_decision_;
};

}  // namespace natadv
