#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "natadv/nn.hpp"

namespace natadv {

struct TrainingConfig {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip_eps = 0.2;
  double lr_critic = 1e-3;         // eta_phi
  double lr_actor = 1e-4;          // eta_theta
  double lr_discriminator = 1e-4;  // eta_xi
  int batch_size = 2048;
  double initial_kl_M = 25.0;
  double balance_w = 0.02;
  int max_episodes = 500;
  int epochs = 10;
  int minibatch = 256;
  int disc_minibatch = 256;
  std::vector<int> hidden{128, 128};
  double initial_logvar = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const TrainingConfig& c);
TrainingConfig training_from_json(const nlohmann::json& j, TrainingConfig base = {});

struct StepResult {
  Eigen::VectorXd obs;
  double reward = 0.0;
  bool done = false;       // terminal: no bootstrap
  bool truncated = false;  // time limit: bootstrap from the critic
};

class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_dim() const = 0;
  virtual int action_dim() const = 0;
  virtual Eigen::VectorXd action_low() const = 0;
  virtual Eigen::VectorXd action_high() const = 0;
  virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
  virtual StepResult step(const Eigen::VectorXd& action) = 0;
  // Extra per-step data recorded with each transition (taken before step()).
  virtual Eigen::VectorXd auxiliary() const { return {}; }
};

struct Transition {
  Eigen::VectorXd obs;
  Eigen::VectorXd raw_action;  // unclamped Gaussian sample
  Eigen::VectorXd action;      // clamped, as executed
  Eigen::VectorXd mean;        // policy distribution at collection time
  Eigen::VectorXd logvar;
  Eigen::VectorXd aux;
  double reward = 0.0;         // training reward (hooks may rewrite it)
  double env_reward = 0.0;
  double logprob = 0.0;
  double value = 0.0;
  double next_value = 0.0;
  bool done = false;
  bool truncated = false;
  int episode = 0;
};

struct RolloutBuffer {
  std::vector<Transition> steps;
  std::size_t size() const { return steps.size(); }
  bool empty() const { return steps.empty(); }
  void clear() { steps.clear(); }
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> targets;
};

// Generalized advantage estimation. The chain is cut at done/truncated and at
// the buffer end; done transitions bootstrap 0, others next_value.
GaeResult compute_gae(const RolloutBuffer& buffer, double gamma, double lambda);

double critic_loss(const std::vector<double>& predicted, const std::vector<double>& targets);

// -mean(min(r A, clip(r, 1-eps, 1+eps) A)), r = exp(new - old).
double clipped_surrogate(const std::vector<double>& logprob_new, const std::vector<double>& logprob_old,
                         const std::vector<double>& advantages, double eps);
// d loss / d logprob_new per sample.
std::vector<double> clipped_surrogate_grad(const std::vector<double>& logprob_new,
                                           const std::vector<double>& logprob_old,
                                           const std::vector<double>& advantages, double eps);

// Per-column log N(a; mean, exp(logvar)) and its partial derivatives.
Eigen::VectorXd batch_logprob(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& logvar, const Eigen::MatrixXd& a);

struct PpoAgent {
  GaussianPolicy actor;
  Mlp critic;
  AdamState actor_opt;
  AdamState critic_opt;

  PpoAgent() = default;
  PpoAgent(int obs_dim, int act_dim, const TrainingConfig& cfg, std::mt19937_64& rng);
  double value(const Eigen::VectorXd& obs) const;
};

// Keeps the environment between batches so episodes span collection calls.
// Episode k is reset with seed + k; the exploration noise of step t in
// episode k comes from its own stream keyed by (seed, k, t).
class RolloutCollector {
 public:
  RolloutCollector(Environment& env, std::uint64_t seed);
  RolloutBuffer collect(const PpoAgent& agent, std::size_t n);
  int episodes_completed() const { return episodes_; }
  // Env-reward returns of all finished episodes, in order.
  const std::vector<double>& episode_returns() const { return returns_; }

 private:
  Environment& env_;
  std::uint64_t seed_;
  Eigen::VectorXd obs_;
  int step_in_episode_ = 0;
  bool need_reset_ = true;
  int episodes_ = 0;
  double running_return_ = 0.0;
  std::vector<double> returns_;
};

// Collects exactly n transitions starting from a fresh reset; the seed is
// drawn from rng.
RolloutBuffer collect_rollouts(Environment& env, const PpoAgent& agent, std::size_t n, std::mt19937_64& rng);

// Seed of the exploration noise for step t of episode k.
std::uint64_t noise_seed(std::uint64_t seed, int episode, int step);

// Extra actor-loss gradient for a minibatch: receives the minibatch indices,
// the current policy output and the factor applied to raw advantages by the
// normalization (1/std), and adds to grad_mean / grad_logvar.
using ActorLossHook = std::function<void(const RolloutBuffer&, const std::vector<std::size_t>&,
                                         const GaussianPolicy::Output&, double advantage_scale,
                                         Eigen::MatrixXd& grad_mean, Eigen::MatrixXd& grad_logvar)>;

struct UpdateStats {
  int update = 0;
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double mean_reward = 0.0;
  double mean_kl = 0.0;  // KL(old || new) averaged over the buffer
  int episodes = 0;
};

// Normalizes advantages, then runs epochs of minibatch Adam steps on both
// networks. Clears the buffer.
UpdateStats ppo_update(PpoAgent& agent, RolloutBuffer& buffer, const TrainingConfig& cfg, std::mt19937_64& rng,
                       const ActorLossHook& extra = {});

struct PpoHooks {
  std::function<void(RolloutBuffer&)> before_update;
  ActorLossHook actor_extra;
  std::function<void(const UpdateStats&)> after_update;
};

struct TrainingResult {
  std::vector<UpdateStats> updates;
  std::vector<double> episode_returns;
};

// Alternates collection of cfg.batch_size transitions and updates until
// cfg.max_episodes episodes have finished.
TrainingResult train_ppo(Environment& env, PpoAgent& agent, const TrainingConfig& cfg, std::mt19937_64& rng,
                         const PpoHooks& hooks = {});

std::string training_log_csv(const std::vector<UpdateStats>& updates);

}  // namespace natadv
