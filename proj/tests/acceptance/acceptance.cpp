// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "natadv/adversarial.hpp"
#include "natadv/analysis.hpp"
#include "natadv/calibration.hpp"
#include "natadv/gail.hpp"
#include "natadv/idm.hpp"
#include "natadv/pipeline.hpp"
#include "natadv/ppo.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/toy_env.hpp"

using namespace natadv;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const IdmParameters kTableI{2.0, 10.0, 4.0, 1.0, 1.0, 0.5};

// ---------------------------------------------------------------------------

Outcome idm_evaluation() {
  Outcome o;
  o.check(IdmParameters{} == kTableI, "shipped IDM defaults differ from the calibrated table");
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  o.check(near(idm_desired_gap(kTableI, 0, 0), 1.0), "s*(0,0)");
  o.check(near(idm_desired_gap(kTableI, 10, 0), 6.0), "s*(10,0)");
  o.check(near(idm_desired_gap(kTableI, 10, 2), 6.0 + 20.0 / (2.0 * std::sqrt(2.0))), "s*(10,2)");
  o.check(near(idm_acceleration(kTableI, 0, 0, 1e12), 2.0), "free start");
  o.check(near(idm_acceleration(kTableI, 10, 0, 6.0), -2.0), "v0 at s*");
  o.check(near(idm_acceleration(kTableI, 10, 0, 12.0), -0.5), "v=10 gap=12");
  // hand formula on a grid
  for (double v = 0; v <= 15; v += 1.5)
    for (double dv = -4; dv <= 4; dv += 1)
      for (double gap = 0.5; gap < 60; gap *= 1.7) {
        const double s = 1.0 + 0.5 * v + v * dv / (2.0 * std::sqrt(2.0));
        const double hand = 2.0 * (1.0 - std::pow(v / 10.0, 4) - (s / gap) * (s / gap));
        if (!near(idm_acceleration(kTableI, v, dv, gap), hand)) o.check(false, fmt("grid v=%g dv=%g gap=%g", v, dv, gap));
      }
  // equilibrium held over 100 steps behind a leader at the same speed
  double worst = 0.0;
  for (double v : {2.0, 5.0, 8.0, 9.5}) {
    const double g0 = idm_equilibrium_gap(kTableI, v);
    LeaderTrajectory lead;
    for (int i = 0; i <= 100; ++i) {
      lead.rear_position.push_back(100.0 + v * i * kFrameDt);
      lead.speed.push_back(v);
    }
    const auto gaps = simulate_idm_follower(kTableI, lead, 100.0 - g0, v, kFrameDt);
    for (double g : gaps) worst = std::max(worst, std::abs(g - g0));
  }
  o.check(worst <= 1e-6, fmt("equilibrium drift %.3g", worst));
  if (o.pass) o.detail = fmt("hand evaluations to 1e-9, equilibrium drift %.2g m", worst);
  return o;
}

CalibrationSegment synthetic_segment(std::uint64_t seed, double noise) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 6.3), amp(0.5, 1.5), v0(4.0, 9.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  CalibrationSegment s;
  const double a = amp(rng), ph = phase(rng);
  double x = 30.0, v = v0(rng);
  for (int i = 0; i < 300; ++i) {
    s.leader.rear_position.push_back(x);
    s.leader.speed.push_back(v);
    v = std::max(0.0, v + a * std::sin(i * 0.04 + ph) * kFrameDt);
    x += v * kFrameDt;
  }
  s.follower_speed = s.leader.speed[0];
  s.follower_front = 30.0 - idm_equilibrium_gap(kTableI, std::min(s.follower_speed, 9.9)) - 2.0;
  s.data_gaps = simulate_idm_follower(kTableI, s.leader, s.follower_front, s.follower_speed, kFrameDt);
  for (double& g : s.data_gaps) g *= 1.0 + noise * n01(rng);
  return s;
}

Outcome idm_calibration() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double obj[2];
  for (int k = 0; k < 2; ++k) {
    const double noise = k == 0 ? 0.0 : 0.05;
    std::vector<CalibrationSegment> corpus;
    for (std::uint64_t s = 1; s <= 8; ++s) corpus.push_back(synthetic_segment(s, noise));
    const auto c = calibrate_idm(corpus, IdmRanges{}, GaConfig{});
    obj[k] = c.best_per_generation.back();
    for (std::size_t i = 1; i < c.best_per_generation.size(); ++i)
      if (c.best_per_generation[i] > c.best_per_generation[i - 1]) o.check(false, "best-objective curve increased");
  }
  const double t = seconds_since(t0);
  o.check(obj[0] <= 0.05, fmt("noise-free objective %.4f > 0.05", obj[0]));
  o.check(obj[1] <= 0.25, fmt("noisy objective %.4f > 0.25", obj[1]));
  o.check(t <= 120.0, fmt("%.1f s > 120 s", t));
  if (o.pass) o.detail = fmt("objective %.4f noise-free, %.4f with 5%% noise, %.1f s", obj[0], obj[1], t);
  return o;
}

Outcome gradient_check() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> dim(1, 12), depth(0, 3);
  std::vector<MlpSpec> specs{{56, {128, 128}, 4}, {56, {128, 128}, 1}, {58, {128, 128}, 1}};
  while (specs.size() < 20) {
    MlpSpec s{dim(rng), {}, dim(rng)};
    for (int d = depth(rng); d > 0; --d) s.hidden.push_back(dim(rng));
    specs.push_back(s);
  }
  double worst = 0.0;
  for (const auto& s : specs) {
    const double e = oracle::gradient_check(Mlp(s, rng), rng, 1e-6);
    worst = std::max(worst, e);
  }
  o.check(worst < 1e-4, fmt("max relative error %.3g", worst));
  if (o.pass) o.detail = fmt("20 nets, max relative error %.2g", worst);
  return o;
}

Outcome gae_oracle() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> len(1, 64);
  std::bernoulli_distribution end(0.1), trunc(0.5);
  double worst = 0.0;
  for (int r = 0; r < 200; ++r) {
    RolloutBuffer b;
    for (int t = len(rng); t > 0; --t) {
      Transition s;
      s.reward = n01(rng);
      s.value = n01(rng);
      s.next_value = n01(rng);
      if (end(rng)) (trunc(rng) ? s.truncated : s.done) = true;
      b.steps.push_back(s);
    }
    const auto g = compute_gae(b, 0.99, 0.95);
    const auto ref = oracle::gae_brute_force(b, 0.99, 0.95);
    for (std::size_t t = 0; t < b.size(); ++t) worst = std::max(worst, std::abs(g.advantages[t] - ref[t]));
  }
  o.check(worst <= 1e-10, fmt("max deviation %.3g", worst));
  if (o.pass) o.detail = fmt("200 rollouts, max deviation %.2g", worst);
  return o;
}

Outcome kl_correctness() {
  Outcome o;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 4);
  double worst_z = 0.0;
  for (int pair = 0; pair < 10; ++pair) {
    const int d = dim(rng);
    Eigen::VectorXd mp(d), mq(d), vp(d), vq(d);
    for (int i = 0; i < d; ++i) {
      mp[i] = n01(rng);
      mq[i] = n01(rng);
      vp[i] = std::exp(0.5 * n01(rng));
      vq[i] = std::exp(0.5 * n01(rng));
    }
    const double kl = diag_gaussian_kl(mp, vp, mq, vq);
    const auto [mc, se] = oracle::kl_monte_carlo(mp, vp, mq, vq, 1000000, rng);
    const double z = std::abs(kl - mc) / se;
    worst_z = std::max(worst_z, z);
    o.check(z <= 3.0, fmt("pair %d off by %.2f SE", pair, z));
  }
  double min_kl = 1e300;
  for (int i = 0; i < 10000; ++i) {
    Eigen::VectorXd mp(2), mq(2), vp(2), vq(2);
    for (int j = 0; j < 2; ++j) {
      mp[j] = 3 * n01(rng);
      mq[j] = 3 * n01(rng);
      vp[j] = std::exp(2 * n01(rng));
      vq[j] = std::exp(2 * n01(rng));
    }
    min_kl = std::min({min_kl, diag_gaussian_kl(mp, vp, mq, vq), diag_gaussian_kl(mp, vp, mp, vp)});
  }
  o.check(min_kl >= 0.0, "negative KL");
  const Eigen::VectorXd m = Eigen::VectorXd::Zero(2), lv = Eigen::VectorXd::Zero(2);
  o.check(naturalness_reward(m, lv, m, lv, 25.0) == 1.0, "R_nat at KL = 0");
  // one dimension with a mean gap of sqrt(50) has KL exactly 25
  Eigen::VectorXd far = m;
  far[0] = std::sqrt(50.0);
  o.check(naturalness_reward(m, lv, far, lv, 25.0) == 0.0, "R_nat at KL = 25");
  far[0] = 20.0;
  o.check(naturalness_reward(m, lv, far, lv, 25.0) == 0.0, "R_nat at KL > 25");
  if (o.pass) o.detail = fmt("10 pairs within %.2f SE of 1e6-sample Monte Carlo, R_nat endpoints exact", worst_z);
  return o;
}

// Shared by the GAIL and naturalness criteria.
struct GailSetup {
  std::shared_ptr<RecordedScene> scene;
  ExpertBuffer expert;
  std::unique_ptr<GailReplayEnv> env;
  std::unique_ptr<GailTrainer> trainer;
  GailEvaluation before, after;
  double seconds = 0.0;
};

TrainingConfig gail_budget() {
  TrainingConfig g;
  g.max_episodes = 150;
  g.batch_size = 512;
  g.lr_actor = 1e-3;
  g.minibatch = 64;
  g.disc_minibatch = 256;
  g.initial_logvar = -3.0;
  g.seed = 8;
  return g;
}

GailSetup& gail_setup() {
  static GailSetup s = [] {
    GailSetup s;
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticTrafficConfig sc;
    sc.driver.accel_noise_std = 0.5;
    sc.driver.steering_noise_std = 0.1;
    s.scene = std::make_shared<RecordedScene>(simulate_traffic(sc));
    s.expert = collect_expert_trajectories(*s.scene, ExpertRules{});
    const TrainingConfig g = gail_budget();
    std::mt19937_64 rng(g.seed);
    s.env = std::make_unique<GailReplayEnv>(s.scene, s.expert.scenarios);
    s.trainer = std::make_unique<GailTrainer>(s.env->observation_dim(), g, rng);
    s.before = evaluate_gail(*s.env, *s.trainer, s.expert, 20, 99);
    train_gail(*s.env, *s.trainer, s.expert, g, rng);
    s.after = evaluate_gail(*s.env, *s.trainer, s.expert, 20, 99);
    s.seconds = seconds_since(t0);
    return s;
  }();
  return s;
}

Outcome reward_contracts() {
  Outcome o;
  // branch table
  CollisionEvent hit_av, hit_other, bystanders;
  hit_av.ids = {2, 1};
  hit_other.ids = {1, 3};
  bystanders.ids = {2, 3};
  o.check(collision_reward({hit_av}, 1, 2) == 1, "agent-AV branch");
  o.check(collision_reward({hit_other}, 1, 2) == -1, "agent-background branch");
  o.check(collision_reward({}, 1, 2) == 0, "no-collision branch");
  o.check(collision_reward({bystanders}, 1, 2) == 0, "bystander contact");
  o.check(collision_reward({hit_other, hit_av}, 1, 2) == 1, "AV contact wins");

  // every step of generated runs under two policies and both weights
  std::size_t steps = 0, bad = 0;
  std::mt19937_64 rng(5);
  const GaussianPolicy prior(56, {32}, 2, rng, -1.0);
  for (double w : {0.02, 0.0}) {
    for (double lv : {-2.0, 1.0}) {
      const GaussianPolicy policy(10, {32}, 2, rng, lv);
      AdvEnv env{AdvSceneConfig{}};
      GenerationConfig gc;
      gc.runs = 25;
      gc.reward.balance_w = w;
      for (const auto& r : generate_scenarios(policy, prior, env, gc)) {
        for (const auto& s : r.steps) {
          ++steps;
          const bool ok = s.r_adv >= -2.0 && s.r_adv <= 2.0 && s.r_nat >= 0.0 && s.r_nat <= 1.0 &&
                          s.r_t == s.r_adv + w * s.r_nat;
          bad += !ok;
        }
      }
    }
  }
  // and during training
  TrainingConfig cfg;
  cfg.hidden = {32, 32};
  cfg.batch_size = 256;
  cfg.minibatch = 64;
  cfg.max_episodes = 20;
  AdvEnv env{AdvSceneConfig{}};
  PpoAgent agent(10, 2, cfg, rng);
  const auto res = train_adversarial(env, prior, agent, cfg, rng);
  o.check(bad == 0, fmt("%zu of %zu generated steps broke a contract", bad, steps));
  o.check(res.contract_violations == 0, fmt("%zu training steps broke a contract", res.contract_violations));
  if (o.pass) o.detail = fmt("%zu generated + %zu training steps, branch table matches", steps, res.steps_checked);
  return o;
}

Outcome ppo_sanity() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  TrainingConfig cfg;
  cfg.batch_size = 500;
  cfg.minibatch = 64;
  cfg.max_episodes = 200;
  cfg.hidden = {64, 64};
  toy::ReachTarget env;
  std::mt19937_64 rng(cfg.seed);
  PpoAgent agent(2, 1, cfg, rng);
  const auto res = train_ppo(env, agent, cfg, rng);
  const double t = seconds_since(t0);
  const auto& r = res.episode_returns;
  // initial policy: the first 20 episodes; trained policy: 20 fresh episodes
  const double first = std::accumulate(r.begin(), r.begin() + std::min<std::size_t>(20, r.size()), 0.0) / 20.0;
  const auto eval = collect_rollouts(env, agent, 20 * 50, rng);
  double last = 0.0;
  for (const auto& s : eval.steps) last += s.reward;
  last /= 20.0;
  const double gain = (last - first) / std::abs(first);
  o.check(r.size() <= 200 + 10, fmt("%zu episodes used", r.size()));
  o.check(gain >= 0.5, fmt("improvement %.1f%% < 50%%", 100 * gain));
  o.check(t <= 60.0, fmt("%.1f s > 60 s", t));
  if (o.pass) o.detail = fmt("return %.1f -> %.1f (+%.0f%%) in %zu episodes, %.1f s", first, last, 100 * gain, r.size(), t);
  return o;
}

Outcome gail_equilibrium() {
  Outcome o;
  const auto& s = gail_setup();
  o.check(s.after.disc_accuracy >= 0.45 && s.after.disc_accuracy <= 0.6,
          fmt("discriminator accuracy %.3f outside [0.45, 0.6]", s.after.disc_accuracy));
  o.check(s.after.mean_kl <= 0.5 * s.before.mean_kl, fmt("KL %.3f -> %.3f", s.before.mean_kl, s.after.mean_kl));
  o.check(s.seconds <= 300.0, fmt("%.1f s > 300 s", s.seconds));
  if (o.pass)
    o.detail = fmt("accuracy %.3f, KL %.3f -> %.3f, %.1f s", s.after.disc_accuracy, s.before.mean_kl, s.after.mean_kl,
                   s.seconds);
  return o;
}

struct AgentEval {
  double accel_width = 0, steer_width = 0, r_nat = 0, collision_rate = 0;
};

AgentEval train_and_evaluate(const GaussianPolicy& prior, double w) {
  TrainingConfig c;
  c.max_episodes = 150;
  c.batch_size = 256;
  c.lr_actor = 1e-3;
  c.initial_logvar = -1.0;
  c.hidden = {64, 64};
  c.minibatch = 64;
  c.seed = 1;
  c.balance_w = w;
  AdvEnv env{AdvSceneConfig{}};
  std::mt19937_64 rng(c.seed);
  PpoAgent agent(10, 2, c, rng);
  train_adversarial(env, prior, agent, c, rng);
  GenerationConfig gc;
  gc.runs = 100;
  gc.seed = 1000;
  gc.reward.balance_w = w;
  const auto recs = generate_scenarios(agent.actor, prior, env, gc);
  const auto micro = micro_metrics(recs).at(Role::kAgent);
  AgentEval e;
  e.accel_width = micro.accel_range.second - micro.accel_range.first;
  e.steer_width = micro.steering_range.second - micro.steering_range.first;
  e.r_nat = mean_naturalness(recs);
  e.collision_rate = macro_metrics(recs).collision_rate_av;
  return e;
}

Outcome naturalness_directionality() {
  Outcome o;
  const GaussianPolicy& prior = gail_setup().trainer->generator.actor;
  const AgentEval base = train_and_evaluate(prior, 0.0), nat = train_and_evaluate(prior, 0.02);
  o.check(nat.accel_width < base.accel_width, fmt("accel range %.2f vs %.2f not narrower", nat.accel_width, base.accel_width));
  o.check(nat.steer_width < base.steer_width, fmt("steering range %.3f vs %.3f not narrower", nat.steer_width, base.steer_width));
  o.check(nat.r_nat > base.r_nat, fmt("mean R_nat %.4f vs %.4f not higher", nat.r_nat, base.r_nat));
  o.check(base.collision_rate > 0 && nat.collision_rate > 0,
          fmt("AV collision rates %.2f / %.2f", base.collision_rate, nat.collision_rate));
  const std::string numbers =
      fmt("w=0.02 vs w=0: accel %.2f/%.2f, steer %.3f/%.3f, R_nat %.4f/%.4f, AV collisions %.2f/%.2f", nat.accel_width,
          base.accel_width, nat.steer_width, base.steer_width, nat.r_nat, base.r_nat, nat.collision_rate,
          base.collision_rate);
  o.detail = o.pass ? numbers : o.detail + " (" + numbers + ")";
  return o;
}

Outcome collision_taxonomy() {
  Outcome o;
  for (const auto& g : fixture::canonical_geometries()) {
    const auto l = label_collision_type(fixture::contact(g.first, g.second));
    o.check(l.label == g.label, fmt("geometry %d labeled %d", g.label, l.label));
    o.check(l.counter_intuitive == (g.label >= 7), fmt("label %d counter-intuitive flag", g.label));
    o.check(label_collision_type(fixture::contact(g.second, g.first)).label == g.label,
            fmt("geometry %d depends on vehicle order", g.label));
  }
  for (std::uint64_t seed : {31, 32, 33}) {
    const auto [X, truth] = fixture::planar_blobs(10, 30, seed);
    const auto p = pca_reduce(X, 2);
    const auto km = kmeans_cluster(p.scores, 10, seed);
    o.check(fixture::same_partition(km.assignments, truth), fmt("blob set %llu not recovered", (unsigned long long)seed));
  }
  if (o.pass) o.detail = "10 geometries labeled, 3 blob sets recovered exactly";
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "natadv_acceptance_pipeline";
  fs::remove_all(dir);
  const auto t0 = std::chrono::steady_clock::now();
  CommandContext ctx{resolve_config(std::nullopt, {}, 7), dir, false};
  for (const auto& c : kCommands) {
    try {
      run_command(c, ctx);
    } catch (const std::exception& e) {
      o.check(false, c + " failed: " + e.what());
      return o;
    }
  }
  const double t = seconds_since(t0);
  const std::string first = read_file(dir / "scenarios.jsonl");
  run_command("generate", ctx);
  const std::string second = read_file(dir / "scenarios.jsonl");
  std::istringstream a(first), b(second);
  const auto ra = read_scenarios_jsonl(a), rb = read_scenarios_jsonl(b);
  o.check(first == second, "scenarios.jsonl differs between runs");
  o.check(ra == rb && !ra.empty(), "scenario records differ");
  o.check(t < 600.0, fmt("pipeline took %.1f s", t));
  if (o.pass) o.detail = fmt("%zu records bit-identical, pipeline %.1f s", ra.size(), t);
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"IDM evaluation", idm_evaluation},
      {"IDM calibration recovery", idm_calibration},
      {"gradient correctness", gradient_check},
      {"GAE oracle", gae_oracle},
      {"KL correctness", kl_correctness},
      {"reward contracts", reward_contracts},
      {"PPO sanity", ppo_sanity},
      {"GAIL equilibrium", gail_equilibrium},
      {"naturalness directionality", naturalness_directionality},
      {"collision taxonomy", collision_taxonomy},
      {"determinism and pipeline", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    failed += !o.pass;
    std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
