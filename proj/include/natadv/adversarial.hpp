#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "natadv/gail.hpp"
#include "natadv/nn.hpp"
#include "natadv/ppo.hpp"
#include "natadv/scenario_log.hpp"
#include "natadv/sim.hpp"
#include "natadv/traffic.hpp"

namespace natadv {

struct AdvRewardConfig {
  double M = 25.0;
  double balance_w = 0.02;

  void validate() const;
};

inline constexpr double kAvSearchRadius = 50.0;

// Nearest vehicle within 50 m in the ego's lane or an adjacent one, else the
// nearest vehicle outside those lanes within 50 m, else the globally nearest.
// Ties go to the lower id. Throws InvalidStateError with fewer than 2 vehicles.
VehicleId select_av_under_test(const WorldState& world, VehicleId ego);

// clip((|dp0| - |dp|) / |dp0|, -1, 1). Throws DomainError when |dp0| == 0.
double distance_reward(const Vec2& av0, const Vec2& agent0, const Vec2& av, const Vec2& agent);

// +1 for an agent-AV contact (wins over everything), -1 for any other agent
// contact, else 0.
int collision_reward(const std::vector<CollisionEvent>& events, VehicleId agent, VehicleId av);

double adversarial_reward(double r_d, double r_c);

// clip((M - KL(prior || policy)) / M, 0, 1) over diagonal Gaussians given by
// mean and log-variance.
double naturalness_reward(const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_logvar,
                          const Eigen::VectorXd& policy_mean, const Eigen::VectorXd& policy_logvar, double M);
double naturalness_reward(const GaussianPolicy& prior, const Eigen::VectorXd& prior_input,
                          const GaussianPolicy::Output& policy, double M);

double total_reward(double r_adv, double r_nat, double balance_w);

// relative_features(agent, av) followed by the agent's lateral offset,
// lateral speed, longitudinal speed and heading relative to its lane, then
// the AV's speed.
using AdvState = Eigen::Matrix<double, 10, 1>;
AdvState adv_state_features(const WorldState& world, VehicleId agent, VehicleId av);
Eigen::VectorXd scale_adv_features(const AdvState& raw);

// Straight multi-lane road with platoons of surrogate-driven vehicles; the
// agent starts inside the middle lane's platoon.
struct AdvSceneConfig {
  std::size_t lanes = 3;
  double lane_width = 3.7;
  double road_length = 1000.0;
  std::size_t vehicles_per_lane = 4;
  double spacing = 20.0;
  double speed = 10.0;
  double position_jitter = 2.0;  // uniform +- on initial x
  double speed_jitter = 1.0;     // uniform +- on initial speed and desired speed
  std::size_t agent_lane = 1;
  std::size_t agent_slot = 1;  // platoon position replaced by the agent
  SurrogateConfig traffic;
  SimConfig sim;

  void validate() const;
};

nlohmann::json to_json(const AdvSceneConfig& c);
AdvSceneConfig adv_scene_from_json(const nlohmann::json& j, AdvSceneConfig base = {});

struct AdvStepInfo {
  double r_d = 0.0;
  int r_c = 0;
  double r_adv = 0.0;
  std::vector<CollisionEvent> events;
  std::optional<Termination> termination;
  ControlAction agent_action;
  std::map<VehicleId, ControlAction> controls;
};

// Agent observes the scaled 10-dim state and acts inside kAdversarialBounds;
// the environment reward is R_adv. auxiliary() is the prior's scaled 56-dim
// input for the same world.
class AdvEnv : public Environment {
 public:
  explicit AdvEnv(AdvSceneConfig cfg);

  int observation_dim() const override { return 10; }
  int action_dim() const override { return 2; }
  Eigen::VectorXd action_low() const override;
  Eigen::VectorXd action_high() const override;
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;
  Eigen::VectorXd auxiliary() const override;

  const WorldState& world() const { return world_; }
  VehicleId agent() const { return agent_; }
  VehicleId av() const { return av_; }
  int steps() const { return t_; }
  const AdvStepInfo& last_step() const { return last_; }
  const AdvSceneConfig& config() const { return cfg_; }

 private:
  Eigen::VectorXd observe() const;

  AdvSceneConfig cfg_;
  SurrogateTraffic traffic_;
  WorldState world_;
  VehicleId agent_ = 0;
  VehicleId av_ = 0;
  Vec2 av0_, agent0_;
  int t_ = 0;
  AdvStepInfo last_;
};

struct AdvEpisodeStats {
  int episode = 0;
  int steps = 0;
  double mean_r_adv = 0.0;
  double mean_r_nat = 0.0;
};

struct AdvTrainingResult {
  TrainingResult ppo;
  std::vector<AdvEpisodeStats> episodes;
  std::size_t steps_checked = 0;
  std::size_t contract_violations = 0;  // R_adv outside [-2,2], R_nat outside [0,1], or R_t mismatch
};

// PPO on R_t = R_adv + w R_nat. R_nat is evaluated against the frozen prior
// at the policy distribution used for collection; its direct dependence on
// the policy parameters enters the actor gradient as well.
AdvTrainingResult train_adversarial(AdvEnv& env, const GaussianPolicy& prior, PpoAgent& agent,
                                    const TrainingConfig& cfg, std::mt19937_64& rng);

std::string adv_training_csv(const AdvTrainingResult& r);

struct ScenarioStep {
  StepSnapshot snapshot;
  double r_adv = 0.0;
  double r_nat = 0.0;
  double r_t = 0.0;
  std::vector<CollisionEvent> events;
  bool operator==(const ScenarioStep&) const = default;
};

struct ScenarioRecord {
  int run = 0;
  std::uint64_t seed = 0;
  VehicleId agent = 0;
  VehicleId av = 0;
  std::vector<VehicleState> initial;
  std::vector<ScenarioStep> steps;
  Termination termination = Termination::kHorizon;

  std::vector<CollisionEvent> collisions() const;
  bool agent_hit_av() const;
  bool agent_hit_other() const;
  bool operator==(const ScenarioRecord&) const = default;
};

struct GenerationConfig {
  int runs = 100;
  std::uint64_t seed = 1;
  bool stochastic = true;  // sample the policy; otherwise act on its mean
  AdvRewardConfig reward;
};

// Run i resets the environment with seed + i and draws its action noise from
// the stream keyed by (seed, i, step).
std::vector<ScenarioRecord> generate_scenarios(const GaussianPolicy& policy, const GaussianPolicy& prior,
                                               AdvEnv& env, const GenerationConfig& cfg);

// One line per step; the first line of each run carries the roles and the
// initial vehicles.
void write_scenarios_jsonl(std::ostream& os, const std::vector<ScenarioRecord>& records);
std::vector<ScenarioRecord> read_scenarios_jsonl(std::istream& is);
nlohmann::json scenario_summary_json(const std::vector<ScenarioRecord>& records);

}  // namespace natadv
