#include "natadv/gail.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "natadv/error.hpp"

namespace natadv {

LaneFrame lane_frame(const WorldState& world, const VehicleState& v) {
  LaneFrame f;
  if (!world.road || world.road->lanes.empty()) {
    f.off_lane = true;
    return f;
  }
  std::optional<std::size_t> idx;
  if (v.lane) idx = world.road->index_of(*v.lane);
  if (!idx) {
    f.off_lane = true;
    idx = nearest_lane(*world.road, v.position, 1e9);
  }
  if (!idx) return f;
  const auto proj = project_onto_lane(world.road->lanes[*idx], v.position);
  f.lateral = proj.lateral;
  f.heading = proj.heading;
  return f;
}

namespace {

constexpr std::array<double, 6> kEgoScale{5.0, 2.0, 2.0, 2.0, 20.0, 0.5};
constexpr std::array<double, 5> kNeighborScale{5.0, 50.0, 5.0, 10.0, 0.5};

}  // namespace

GailFeatures gail_state_features(const WorldState& world, VehicleId ego_id, const GailFeatureSpec& spec) {
  const VehicleState& ego = world.at(ego_id);
  GailFeatures out;
  out.values = Eigen::VectorXd::Zero(spec.dim());
  const LaneFrame lf = lane_frame(world, ego);
  out.off_lane = lf.off_lane;
  const double rel_heading = wrap_angle(ego.heading - lf.heading);
  out.values[0] = ego.length;
  out.values[1] = ego.width;
  out.values[2] = lf.lateral;
  out.values[3] = ego.speed * std::sin(rel_heading);
  out.values[4] = ego.speed * std::cos(rel_heading);
  out.values[5] = rel_heading;
  const auto near = neighbors(world, ego_id, spec.radius);
  const std::size_t n = std::min(near.size(), static_cast<std::size_t>(spec.max_neighbors));
  for (std::size_t k = 0; k < n; ++k) {
    const auto rf = relative_features(ego, world.at(near[k].first));
    for (std::size_t j = 0; j < 5; ++j) out.values[static_cast<Eigen::Index>(6 + 5 * k + j)] = rf[j];
  }
  return out;
}

Eigen::VectorXd scale_gail_features(const Eigen::VectorXd& raw) {
  Eigen::VectorXd s = raw;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double c = i < 6 ? kEgoScale[static_cast<std::size_t>(i)] : kNeighborScale[static_cast<std::size_t>((i - 6) % 5)];
    s[i] /= c;
  }
  return s;
}

Eigen::VectorXd scale_expert_action(const Eigen::VectorXd& a) {
  Eigen::VectorXd s = a;
  s[0] /= 3.0;
  s[1] /= std::numbers::pi / 3.0;
  return s;
}

std::vector<ExpertScenario> select_expert_scenarios(const RecordedScene& scene, const ExpertRules& rules) {
  std::vector<ExpertScenario> out;
  const auto len = static_cast<std::size_t>(rules.scenario_steps);
  const auto per = static_cast<std::size_t>(rules.scenarios_per_vehicle);
  for (VehicleId id : scene.vehicle_ids()) {
    const auto span = scene.span_of(id);
    if (!span) continue;
    const std::size_t track = span->second - span->first + 1;
    if (track < len) continue;
    const std::size_t fit = track / len;
    std::vector<std::size_t> starts;
    if (fit <= per) {
      for (std::size_t k = 0; k < fit; ++k) starts.push_back(span->first + k * len);
    } else {
      std::mt19937_64 rng(rules.seed ^ (static_cast<std::uint64_t>(id) * 0x9e3779b97f4a7c15ULL));
      std::uniform_int_distribution<std::size_t> u(0, track - per * len);
      std::vector<std::size_t> offs(per);
      for (auto& o : offs) o = u(rng);
      std::sort(offs.begin(), offs.end());
      for (std::size_t k = 0; k < per; ++k) starts.push_back(span->first + offs[k] + k * len);
    }
    for (std::size_t s : starts) {
      const auto& f = scene.frames[s];
      if (static_cast<int>(f.vehicles.size()) > rules.max_initial_vehicles) continue;
      double mean_speed = 0.0;
      for (const auto& v : f.vehicles) mean_speed += v.speed;
      mean_speed /= static_cast<double>(f.vehicles.size());
      if (mean_speed < rules.min_initial_mean_speed) continue;
      out.push_back({id, s});
    }
  }
  return out;
}

ExpertBuffer collect_expert_trajectories(const RecordedScene& scene, const ExpertRules& rules) {
  ExpertBuffer buf;
  for (const auto& sc : select_expert_scenarios(scene, rules)) {
    std::vector<Eigen::VectorXd> states;
    std::vector<Eigen::Vector2d> actions;
    bool premature = false;
    for (int t = 0; t < rules.scenario_steps && !premature; ++t) {
      const auto& frame = scene.frames[sc.start_frame + static_cast<std::size_t>(t)];
      WorldState w;
      w.road = scene.road;
      w.vehicles = frame.vehicles;
      const VehicleState* ego = w.find(sc.vehicle);
      if (!ego || !ego->lane) {
        premature = true;
        break;
      }
      for (const auto& other : w.vehicles) {
        if (other.id != ego->id && detect_collision(*ego, other)) premature = true;
      }
      if (premature) break;
      states.push_back(gail_state_features(w, sc.vehicle).values);
      const auto it = frame.controls.find(sc.vehicle);
      const ControlAction a = kExpertBounds.clamp(it == frame.controls.end() ? ControlAction{} : it->second);
      actions.emplace_back(a.acceleration, a.steering);
    }
    if (premature) continue;
    buf.states.insert(buf.states.end(), states.begin(), states.end());
    buf.actions.insert(buf.actions.end(), actions.begin(), actions.end());
    buf.scenarios.push_back(sc);
  }
  return buf;
}

nlohmann::json expert_buffer_json(const ExpertBuffer& b) {
  nlohmann::json pairs = nlohmann::json::array();
  for (std::size_t i = 0; i < b.size(); ++i) {
    pairs.push_back({{"s", std::vector<double>(b.states[i].data(), b.states[i].data() + b.states[i].size())},
                     {"a", {b.actions[i][0], b.actions[i][1]}}});
  }
  nlohmann::json sc = nlohmann::json::array();
  for (const auto& s : b.scenarios) sc.push_back({{"vehicle", s.vehicle}, {"start_frame", s.start_frame}});
  return {{"format", "natadv-expert"}, {"version", 1}, {"pairs", pairs}, {"scenarios", sc}};
}

ExpertBuffer expert_buffer_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "natadv-expert") throw SchemaError("not an expert buffer");
  ExpertBuffer b;
  for (const auto& p : j.at("pairs")) {
    const auto s = p.at("s").get<std::vector<double>>();
    const auto a = p.at("a").get<std::vector<double>>();
    if (a.size() != 2) throw SchemaError("expert action must have two components");
    b.states.emplace_back(Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size())));
    b.actions.emplace_back(a[0], a[1]);
  }
  for (const auto& s : j.value("scenarios", nlohmann::json::array())) {
    b.scenarios.push_back({s.at("vehicle").get<VehicleId>(), s.at("start_frame").get<std::size_t>()});
  }
  return b;
}

double discriminator_loss(const std::vector<double>& d_gen, const std::vector<double>& d_exp) {
  if (d_gen.empty() || d_exp.empty()) throw ShapeError("discriminator loss needs both batches");
  auto check = [](double d) {
    if (!(d > 0.0 && d < 1.0)) throw DomainError("discriminator output outside (0, 1)");
  };
  double g = 0.0, e = 0.0;
  for (double d : d_gen) {
    check(d);
    g += std::log(d);
  }
  for (double d : d_exp) {
    check(d);
    e += std::log1p(-d);
  }
  return -(g / static_cast<double>(d_gen.size()) + e / static_cast<double>(d_exp.size()));
}

double discriminator_accuracy(const std::vector<double>& d_gen, const std::vector<double>& d_exp) {
  const std::size_t n = d_gen.size() + d_exp.size();
  if (n == 0) return 0.0;
  std::size_t correct = 0;
  for (double d : d_gen) correct += d > 0.5 ? 1 : 0;
  for (double d : d_exp) correct += d < 0.5 ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(n);
}

double gail_reward(double d) { return -std::log(std::max(d, kGailRewardFloor)); }

Discriminator::Discriminator(int state_dim, int action_dim, const std::vector<int>& hidden, double lr,
                             std::mt19937_64& rng)
    : net_(MlpSpec{state_dim + action_dim, hidden, 1}, rng, 0.1),
      opt_(static_cast<std::size_t>(net_.params().size()), lr) {}

namespace {
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }
// Keeps probabilities strictly inside (0, 1) in double precision.
double squash(double z) { return std::clamp(sigmoid(z), 1e-15, 1.0 - 1e-15); }
}  // namespace

Eigen::VectorXd Discriminator::probability(const Eigen::MatrixXd& inputs) const {
  const Eigen::MatrixXd z = net_.forward(inputs);
  Eigen::VectorXd p(z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) p[j] = squash(z(0, j));
  return p;
}

std::pair<double, double> Discriminator::train_step(const Eigen::MatrixXd& gen, const Eigen::MatrixXd& exp) {
  const Eigen::Index ng = gen.cols(), ne = exp.cols();
  Eigen::MatrixXd x(gen.rows(), ng + ne);
  x << gen, exp;
  Mlp::Cache cache;
  const Eigen::MatrixXd z = net_.forward(x, &cache);
  std::vector<double> dg(static_cast<std::size_t>(ng)), de(static_cast<std::size_t>(ne));
  Eigen::MatrixXd grad(1, ng + ne);
  for (Eigen::Index j = 0; j < ng; ++j) {
    const double d = squash(z(0, j));
    dg[static_cast<std::size_t>(j)] = d;
    grad(0, j) = -(1.0 - d) / static_cast<double>(ng);
  }
  for (Eigen::Index j = 0; j < ne; ++j) {
    const double d = squash(z(0, ng + j));
    de[static_cast<std::size_t>(j)] = d;
    grad(0, ng + j) = d / static_cast<double>(ne);
  }
  const double loss = discriminator_loss(dg, de);
  const double acc = discriminator_accuracy(dg, de);
  adam_step(net_.mutable_params(), net_.backward(cache, grad), opt_);
  return {loss, acc};
}

GailReplayEnv::GailReplayEnv(std::shared_ptr<const RecordedScene> scene, std::vector<ExpertScenario> scenarios,
                             int scenario_steps, GailFeatureSpec spec)
    : scene_(std::move(scene)), scenarios_(std::move(scenarios)), steps_(scenario_steps), spec_(spec) {
  if (!scene_ || scenarios_.empty()) throw InvalidStateError("replay environment needs at least one scenario");
  sim_.dt = scene_->dt;
  sim_.horizon_steps = scenario_steps;
}

Eigen::VectorXd GailReplayEnv::action_low() const {
  return Eigen::Vector2d(kExpertBounds.accel_min, kExpertBounds.steering_min);
}

Eigen::VectorXd GailReplayEnv::action_high() const {
  return Eigen::Vector2d(kExpertBounds.accel_max, kExpertBounds.steering_max);
}

WorldState GailReplayEnv::compose(std::size_t frame) const {
  WorldState w;
  w.road = scene_->road;
  w.step_index = t_;
  w.time = t_ * sim_.dt;
  w.vehicles.push_back(ego_);
  const auto idx = std::min(frame, scene_->frames.size() - 1);
  for (const auto& v : scene_->frames[idx].vehicles) {
    if (v.id != ego_.id) w.vehicles.push_back(v);
  }
  return w;
}

Eigen::VectorXd GailReplayEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  current_ = scenarios_[std::uniform_int_distribution<std::size_t>(0, scenarios_.size() - 1)(rng)];
  t_ = 0;
  const auto* v = [&]() -> const VehicleState* {
    for (const auto& x : scene_->frames[current_.start_frame].vehicles) {
      if (x.id == current_.vehicle) return &x;
    }
    return nullptr;
  }();
  if (!v) throw NotFoundError("scenario vehicle missing from its start frame");
  ego_ = *v;
  world_ = compose(current_.start_frame);
  return scale_gail_features(gail_state_features(world_, ego_.id, spec_).values);
}

StepResult GailReplayEnv::step(const Eigen::VectorXd& action) {
  const ControlAction a = kExpertBounds.clamp({action[0], action[1]});
  ego_ = step_vehicle(ego_, a, sim_);
  if (scene_->road) {
    const auto idx = locate_lane(*scene_->road, ego_.position);
    ego_.lane = idx ? std::optional<int>(scene_->road->lanes[*idx].id) : std::nullopt;
  }
  ++t_;
  world_ = compose(current_.start_frame + static_cast<std::size_t>(t_));
  StepResult r;
  bool collided = false;
  for (const auto& other : world_.vehicles) {
    if (other.id != ego_.id && detect_collision(ego_, other)) collided = true;
  }
  r.done = collided || !ego_.lane;
  r.truncated = !r.done && t_ >= steps_;
  r.obs = scale_gail_features(gail_state_features(world_, ego_.id, spec_).values);
  return r;
}

GailTrainer::GailTrainer(int obs_dim, const TrainingConfig& cfg, std::mt19937_64& rng)
    : generator(obs_dim, 2, cfg, rng), discriminator(obs_dim, 2, cfg.hidden, cfg.lr_discriminator, rng) {}

namespace {

Eigen::VectorXd disc_input(const Eigen::VectorXd& scaled_state, const Eigen::VectorXd& action) {
  Eigen::VectorXd x(scaled_state.size() + 2);
  x << scaled_state, scale_expert_action(action);
  return x;
}

}  // namespace

GailResult train_gail(Environment& env, GailTrainer& trainer, const ExpertBuffer& expert,
                      const TrainingConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  if (expert.size() == 0) throw InvalidStateError("expert buffer is empty; run collect-expert first");
  const Eigen::Index in_dim = env.observation_dim() + 2;
  Eigen::MatrixXd expert_x(in_dim, static_cast<Eigen::Index>(expert.size()));
  for (std::size_t i = 0; i < expert.size(); ++i) {
    expert_x.col(static_cast<Eigen::Index>(i)) = disc_input(scale_gail_features(expert.states[i]), expert.actions[i]);
  }

  GailResult result;
  RolloutCollector collector(env, cfg.seed);
  int update = 0;
  while (collector.episodes_completed() < cfg.max_episodes) {
    const int eps_before = collector.episodes_completed();
    RolloutBuffer buf = collector.collect(trainer.generator, static_cast<std::size_t>(cfg.batch_size));
    const auto n = static_cast<Eigen::Index>(buf.size());
    Eigen::MatrixXd gen_x(in_dim, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& s = buf.steps[static_cast<std::size_t>(j)];
      gen_x.col(j) = disc_input(s.obs, s.action);
    }
    const Eigen::VectorXd d = trainer.discriminator.probability(gen_x);
    GailCurvePoint cp;
    for (Eigen::Index j = 0; j < n; ++j) {
      auto& s = buf.steps[static_cast<std::size_t>(j)];
      s.reward = gail_reward(d[j]);
      cp.mean_reward += s.reward;
      cp.action_mean += s.action;
    }
    cp.mean_reward /= static_cast<double>(n);
    cp.action_mean /= static_cast<double>(n);
    for (const auto& s : buf.steps) cp.action_var += (s.action - cp.action_mean).cwiseAbs2();
    cp.action_var /= static_cast<double>(n);

    // One discriminator epoch on balanced generated / expert minibatches.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<Eigen::Index> pick(0, expert_x.cols() - 1);
    const auto mb = static_cast<Eigen::Index>(std::min<int>(cfg.disc_minibatch, static_cast<int>(n)));
    double loss_sum = 0.0, acc_sum = 0.0;
    int batches = 0;
    for (Eigen::Index start = 0; start < n; start += mb) {
      const Eigen::Index m = std::min(mb, n - start);
      Eigen::MatrixXd g(in_dim, m), e(in_dim, m);
      for (Eigen::Index j = 0; j < m; ++j) {
        g.col(j) = gen_x.col(order[static_cast<std::size_t>(start + j)]);
        e.col(j) = expert_x.col(pick(rng));
      }
      const auto [loss, acc] = trainer.discriminator.train_step(g, e);
      loss_sum += loss;
      acc_sum += acc;
      ++batches;
    }
    cp.disc_loss = loss_sum / batches;
    cp.disc_accuracy = acc_sum / batches;

    const int finished = collector.episodes_completed() - eps_before;
    cp.mean_steps = finished > 0 ? static_cast<double>(n) / finished : static_cast<double>(n);
    ppo_update(trainer.generator, buf, cfg, rng);
    cp.update = update++;
    cp.episodes = collector.episodes_completed();
    result.curve.push_back(cp);
  }
  return result;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> expert_action_gaussian(const ExpertBuffer& expert) {
  if (expert.size() == 0) throw InvalidStateError("expert buffer is empty");
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2), var = Eigen::VectorXd::Zero(2);
  for (const auto& a : expert.actions) mean += a;
  mean /= static_cast<double>(expert.size());
  for (const auto& a : expert.actions) var += (a - mean).cwiseAbs2();
  var /= static_cast<double>(expert.size());
  var = var.cwiseMax(1e-12);
  return {mean, var};
}

GailEvaluation evaluate_gail(Environment& env, const GailTrainer& trainer, const ExpertBuffer& expert,
                             int episodes, std::uint64_t seed) {
  GailEvaluation ev;
  const auto [emean, evar] = expert_action_gaussian(expert);

  // Fresh stochastic rollouts of the policy.
  std::vector<Eigen::VectorXd> gen;
  Eigen::VectorXd amean = Eigen::VectorXd::Zero(2), avar = Eigen::VectorXd::Zero(2);
  std::vector<Eigen::VectorXd> acts;
  std::mt19937_64 rng(seed);
  RolloutCollector collector(env, seed);
  while (collector.episodes_completed() < episodes) {
    RolloutBuffer b = collector.collect(trainer.generator, 1);
    gen.push_back(disc_input(b.steps[0].obs, b.steps[0].action));
    acts.push_back(b.steps[0].action);
    amean += b.steps[0].action;
  }
  ev.policy_pairs = gen.size();
  amean /= static_cast<double>(acts.size());
  for (const auto& a : acts) avar += (a - amean).cwiseAbs2();
  avar = (avar / static_cast<double>(acts.size())).cwiseMax(1e-12);
  ev.mean_kl = diag_gaussian_kl(emean, evar, amean, avar);

  Eigen::MatrixXd gx(env.observation_dim() + 2, static_cast<Eigen::Index>(gen.size()));
  for (std::size_t j = 0; j < gen.size(); ++j) gx.col(static_cast<Eigen::Index>(j)) = gen[j];
  const Eigen::Index m = std::min<Eigen::Index>(gx.cols(), static_cast<Eigen::Index>(expert.size()));
  Eigen::MatrixXd ex(gx.rows(), m);
  std::uniform_int_distribution<std::size_t> pick(0, expert.size() - 1);
  for (Eigen::Index j = 0; j < m; ++j) {
    const std::size_t i = pick(rng);
    ex.col(j) = disc_input(scale_gail_features(expert.states[i]), expert.actions[i]);
  }
  const Eigen::VectorXd dg = trainer.discriminator.probability(gx.leftCols(m));
  const Eigen::VectorXd de = trainer.discriminator.probability(ex);
  ev.disc_accuracy = discriminator_accuracy(std::vector<double>(dg.data(), dg.data() + dg.size()),
                                            std::vector<double>(de.data(), de.data() + de.size()));
  return ev;
}

std::string gail_curves_csv(const GailResult& r) {
  std::string out = "episode,disc_loss,disc_accuracy,mean_steps,mean_reward\n";
  char line[256];
  for (const auto& c : r.curve) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%.17g\n", c.episodes, c.disc_loss, c.disc_accuracy,
                  c.mean_steps, c.mean_reward);
    out += line;
  }
  return out;
}

}  // namespace natadv
