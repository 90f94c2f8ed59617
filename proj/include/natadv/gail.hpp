#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "natadv/nn.hpp"
#include "natadv/ppo.hpp"
#include "natadv/scene.hpp"
#include "natadv/sim.hpp"

namespace natadv {

struct GailFeatureSpec {
  int max_neighbors = 10;
  double radius = 50.0;
  int dim() const { return 6 + 5 * max_neighbors; }
};

// Lateral offset (left positive) and direction of the vehicle's lane, or of
// the nearest centerline when the vehicle is off every lane.
struct LaneFrame {
  double lateral = 0.0;
  double heading = 0.0;
  bool off_lane = false;
};
LaneFrame lane_frame(const WorldState& world, const VehicleState& v);

struct GailFeatures {
  Eigen::VectorXd values;
  bool off_lane = false;  // lateral offset measured from the nearest centerline
};

// Ego block (length, width, lateral offset, lateral speed, longitudinal
// speed, heading relative to the lane) followed by relative_features of the
// nearest neighbors within the radius, zero padded.
GailFeatures gail_state_features(const WorldState& world, VehicleId ego, const GailFeatureSpec& spec = {});

// Fixed per-feature scaling applied before features enter a network.
Eigen::VectorXd scale_gail_features(const Eigen::VectorXd& raw);
Eigen::VectorXd scale_expert_action(const Eigen::VectorXd& action);

struct ExpertRules {
  int scenario_steps = 100;
  int scenarios_per_vehicle = 4;
  int max_initial_vehicles = 40;
  double min_initial_mean_speed = 5.0;
  std::uint64_t seed = 1;
};

struct ExpertScenario {
  VehicleId vehicle = 0;
  std::size_t start_frame = 0;
};

struct ExpertBuffer {
  std::vector<Eigen::VectorXd> states;   // raw 56-dim features
  std::vector<Eigen::Vector2d> actions;  // (accel, steering)
  std::vector<ExpertScenario> scenarios;

  std::size_t size() const { return states.size(); }
};

// Windows of scenario_steps frames per vehicle (at most scenarios_per_vehicle,
// disjoint, placed at random when the track is longer than that many windows).
std::vector<ExpertScenario> select_expert_scenarios(const RecordedScene& scene, const ExpertRules& rules);

// Replays every selected scenario and keeps its state-action pairs unless the
// ego collides or leaves the road.
ExpertBuffer collect_expert_trajectories(const RecordedScene& scene, const ExpertRules& rules);

nlohmann::json expert_buffer_json(const ExpertBuffer& b);
ExpertBuffer expert_buffer_from_json(const nlohmann::json& j);

// -[mean log D(gen) + mean log(1 - D(exp))]; D = 1 means generated.
// Throws DomainError for outputs outside (0, 1).
double discriminator_loss(const std::vector<double>& d_gen, const std::vector<double>& d_exp);
double discriminator_accuracy(const std::vector<double>& d_gen, const std::vector<double>& d_exp);

inline constexpr double kGailRewardFloor = 1e-8;
double gail_reward(double d);

// Logistic classifier over [scaled state; scaled action].
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(int state_dim, int action_dim, const std::vector<int>& hidden, double lr, std::mt19937_64& rng);

  Eigen::VectorXd probability(const Eigen::MatrixXd& inputs) const;  // one column per pair
  // One Adam step on a balanced batch; returns (loss, accuracy) before the step.
  std::pair<double, double> train_step(const Eigen::MatrixXd& generated, const Eigen::MatrixXd& expert);

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }

 private:
  Mlp net_;
  AdamState opt_;
};

// Ego driven by the policy; every other vehicle replays the recording.
class GailReplayEnv : public Environment {
 public:
  GailReplayEnv(std::shared_ptr<const RecordedScene> scene, std::vector<ExpertScenario> scenarios,
                int scenario_steps = 100, GailFeatureSpec spec = {});

  int observation_dim() const override { return spec_.dim(); }
  int action_dim() const override { return 2; }
  Eigen::VectorXd action_low() const override;
  Eigen::VectorXd action_high() const override;
  Eigen::VectorXd reset(std::uint64_t seed) override;
  StepResult step(const Eigen::VectorXd& action) override;

  const WorldState& world() const { return world_; }

 private:
  WorldState compose(std::size_t frame) const;

  std::shared_ptr<const RecordedScene> scene_;
  std::vector<ExpertScenario> scenarios_;
  int steps_;
  GailFeatureSpec spec_;
  SimConfig sim_;
  ExpertScenario current_;
  VehicleState ego_;
  WorldState world_;
  int t_ = 0;
};

struct GailCurvePoint {
  int update = 0;
  int episodes = 0;
  double disc_loss = 0.0;
  double disc_accuracy = 0.0;
  double mean_steps = 0.0;
  double mean_reward = 0.0;
  Eigen::Vector2d action_mean = Eigen::Vector2d::Zero();  // executed actions of the batch
  Eigen::Vector2d action_var = Eigen::Vector2d::Zero();
};

struct GailResult {
  std::vector<GailCurvePoint> curve;
};

struct GailTrainer {
  PpoAgent generator;
  Discriminator discriminator;

  GailTrainer(int obs_dim, const TrainingConfig& cfg, std::mt19937_64& rng);
};

// Alternates generator rollouts (rewarded by the discriminator), one
// discriminator epoch and one PPO update until cfg.max_episodes.
GailResult train_gail(Environment& env, GailTrainer& trainer, const ExpertBuffer& expert,
                      const TrainingConfig& cfg, std::mt19937_64& rng);

struct GailEvaluation {
  double disc_accuracy = 0.0;  // balanced: fresh policy pairs vs expert pairs
  double mean_kl = 0.0;        // KL(expert action Gaussian || policy action Gaussian), both empirical
  std::size_t policy_pairs = 0;
};

// Fits a diagonal Gaussian to the expert actions.
std::pair<Eigen::VectorXd, Eigen::VectorXd> expert_action_gaussian(const ExpertBuffer& expert);

GailEvaluation evaluate_gail(Environment& env, const GailTrainer& trainer, const ExpertBuffer& expert,
                             int episodes, std::uint64_t seed);

std::string gail_curves_csv(const GailResult& r);

}  // namespace natadv
