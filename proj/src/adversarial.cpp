#include "natadv/adversarial.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <cstdio>
#include <set>
#include <tuple>

#include "natadv/error.hpp"

namespace natadv {

using nlohmann::json;

void AdvRewardConfig::validate() const {
  if (!(M > 0.0)) throw SchemaError("reward.M must be > 0");
  if (!(balance_w >= 0.0)) throw SchemaError("reward.balance_w must be >= 0");
}

namespace {

// Lane index of a vehicle, falling back to the nearest centerline.
std::optional<std::size_t> lane_index(const WorldState& world, const VehicleState& v) {
  if (!world.road) return std::nullopt;
  if (v.lane) {
    if (auto i = world.road->index_of(*v.lane)) return i;
  }
  return nearest_lane(*world.road, v.position, 1e9);
}

bool near_lane(const WorldState& world, std::optional<std::size_t> ego_lane, const VehicleState& other) {
  if (!ego_lane) return false;
  const auto o = lane_index(world, other);
  if (!o) return false;
  if (*o == *ego_lane) return true;
  const Lane& l = world.road->lanes[*ego_lane];
  return (l.left && *l.left == *o) || (l.right && *l.right == *o);
}

}  // namespace

VehicleId select_av_under_test(const WorldState& world, VehicleId ego_id) {
  if (world.vehicles.size() < 2) throw InvalidStateError("AV selection needs at least two vehicles");
  const VehicleState& ego = world.at(ego_id);
  const auto ego_lane = lane_index(world, ego);

  struct Cand {
    int tier;
    double dist;
    VehicleId id;
  };
  std::optional<Cand> best;
  for (const auto& v : world.vehicles) {
    if (v.id == ego_id) continue;
    const double d = (v.position - ego.position).norm();
    int tier = 2;
    if (d <= kAvSearchRadius) tier = near_lane(world, ego_lane, v) ? 0 : 1;
    const Cand c{tier, d, v.id};
    if (!best || std::tie(c.tier, c.dist, c.id) < std::tie(best->tier, best->dist, best->id)) best = c;
  }
  return best->id;
}

double distance_reward(const Vec2& av0, const Vec2& agent0, const Vec2& av, const Vec2& agent) {
  const double d0 = (av0 - agent0).norm();
  if (!(d0 > 0.0)) throw DomainError("initial AV-agent separation is zero");
  const double d = (av - agent).norm();
  return std::clamp((d0 - d) / d0, -1.0, 1.0);
}

int collision_reward(const std::vector<CollisionEvent>& events, VehicleId agent, VehicleId av) {
  int r = 0;
  for (const auto& ev : events) {
    const auto o = ev.other(agent);
    if (!o) continue;
    if (*o == av) return 1;
    r = -1;
  }
  return r;
}

double adversarial_reward(double r_d, double r_c) { return r_d + r_c; }

double naturalness_reward(const Eigen::VectorXd& prior_mean, const Eigen::VectorXd& prior_logvar,
                          const Eigen::VectorXd& policy_mean, const Eigen::VectorXd& policy_logvar, double M) {
  if (!(M > 0.0)) throw DomainError("M must be > 0");
  const double kl = diag_gaussian_kl(prior_mean, prior_logvar.array().exp().matrix(), policy_mean,
                                     policy_logvar.array().exp().matrix());
  return std::clamp((M - kl) / M, 0.0, 1.0);
}

double naturalness_reward(const GaussianPolicy& prior, const Eigen::VectorXd& prior_input,
                          const GaussianPolicy::Output& policy, double M) {
  const auto g = prior.forward(Eigen::MatrixXd(prior_input));
  return naturalness_reward(g.mean.col(0), g.logvar.col(0), policy.mean.col(0), policy.logvar.col(0), M);
}

double total_reward(double r_adv, double r_nat, double balance_w) { return r_adv + balance_w * r_nat; }

AdvState adv_state_features(const WorldState& world, VehicleId agent_id, VehicleId av_id) {
  const VehicleState& agent = world.at(agent_id);
  const VehicleState& av = world.at(av_id);
  AdvState s;
  const RelativeFeatures rel = relative_features(agent, av);
  for (int i = 0; i < 5; ++i) s[i] = rel[static_cast<std::size_t>(i)];
  const LaneFrame lf = lane_frame(world, agent);
  const double rh = wrap_angle(agent.heading - lf.heading);
  s[5] = lf.lateral;
  s[6] = agent.speed * std::sin(rh);
  s[7] = agent.speed * std::cos(rh);
  s[8] = rh;
  s[9] = av.speed;
  return s;
}

Eigen::VectorXd scale_adv_features(const AdvState& raw) {
  static const std::array<double, 10> k{5.0, 50.0, 5.0, 10.0, 0.5, 2.0, 2.0, 20.0, 0.5, 20.0};
  Eigen::VectorXd out(10);
  for (int i = 0; i < 10; ++i) out[i] = raw[i] / k[static_cast<std::size_t>(i)];
  return out;
}

void AdvSceneConfig::validate() const {
  if (lanes < 1) throw SchemaError("scene.lanes must be >= 1");
  if (!(lane_width > 0.0)) throw SchemaError("scene.lane_width must be > 0");
  if (vehicles_per_lane < 1) throw SchemaError("scene.vehicles_per_lane must be >= 1");
  if (!(spacing > kDefaultVehicleLength + 2 * position_jitter))
    throw SchemaError("scene.spacing must exceed a vehicle length plus twice the jitter");
  if (agent_lane >= lanes) throw SchemaError("scene.agent_lane out of range");
  if (agent_slot >= vehicles_per_lane) throw SchemaError("scene.agent_slot out of range");
  if (lanes * vehicles_per_lane < 2) throw SchemaError("scene needs at least two vehicles");
  if (!(speed > 0.0) || speed_jitter < 0.0 || speed_jitter >= speed) throw SchemaError("scene.speed/speed_jitter invalid");
  const double extent = 30.0 + spacing * static_cast<double>(vehicles_per_lane + 1);
  if (!(road_length > extent + speed * sim.dt * sim.horizon_steps * 2))
    throw SchemaError("scene.road_length too short for the platoons and horizon");
  sim.validate();
  traffic.idm.validate();
  traffic.mobil.validate();
}

json to_json(const AdvSceneConfig& c) {
  return {{"lanes", c.lanes},
          {"lane_width", c.lane_width},
          {"road_length", c.road_length},
          {"vehicles_per_lane", c.vehicles_per_lane},
          {"spacing", c.spacing},
          {"speed", c.speed},
          {"position_jitter", c.position_jitter},
          {"speed_jitter", c.speed_jitter},
          {"agent_lane", c.agent_lane},
          {"agent_slot", c.agent_slot},
          {"horizon_steps", c.sim.horizon_steps},
          {"idm", to_json(c.traffic.idm)},
          {"mobil", to_json(c.traffic.mobil)}};
}

AdvSceneConfig adv_scene_from_json(const json& j, AdvSceneConfig c) {
  if (!j.is_object()) throw SchemaError("scene: expected an object");
  try {
    c.lanes = j.value("lanes", c.lanes);
    c.lane_width = j.value("lane_width", c.lane_width);
    c.road_length = j.value("road_length", c.road_length);
    c.vehicles_per_lane = j.value("vehicles_per_lane", c.vehicles_per_lane);
    c.spacing = j.value("spacing", c.spacing);
    c.speed = j.value("speed", c.speed);
    c.position_jitter = j.value("position_jitter", c.position_jitter);
    c.speed_jitter = j.value("speed_jitter", c.speed_jitter);
    c.agent_lane = j.value("agent_lane", c.agent_lane);
    c.agent_slot = j.value("agent_slot", c.agent_slot);
    c.sim.horizon_steps = j.value("horizon_steps", c.sim.horizon_steps);
    if (j.contains("idm")) c.traffic.idm = idm_from_json(j.at("idm"));
    if (j.contains("mobil")) c.traffic.mobil = mobil_from_json(j.at("mobil"));
  } catch (const json::exception& e) {
    throw SchemaError(std::string("scene: ") + e.what());
  }
  c.validate();
  return c;
}

AdvEnv::AdvEnv(AdvSceneConfig cfg) : cfg_(std::move(cfg)), traffic_(cfg_.traffic) {
  cfg_.validate();
  cfg_.traffic.accel_noise_std = 0.0;
  cfg_.traffic.steering_noise_std = 0.0;
  cfg_.traffic.wheelbase = cfg_.sim.wheelbase;
  traffic_ = SurrogateTraffic(cfg_.traffic);
}

Eigen::VectorXd AdvEnv::action_low() const {
  return Eigen::Vector2d(kAdversarialBounds.accel_min, kAdversarialBounds.steering_min);
}

Eigen::VectorXd AdvEnv::action_high() const {
  return Eigen::Vector2d(kAdversarialBounds.accel_max, kAdversarialBounds.steering_max);
}

Eigen::VectorXd AdvEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  auto road = std::make_shared<const RoadNetwork>(make_straight_road(cfg_.lanes, cfg_.road_length, cfg_.lane_width));
  world_ = WorldState{};
  world_.road = road;
  world_.rng_seed = seed;
  traffic_ = SurrogateTraffic(cfg_.traffic);
  VehicleId next = 1;
  for (std::size_t l = 0; l < cfg_.lanes; ++l) {
    const double y = road->lanes[l].centerline.front().y;
    const double offset = cfg_.spacing * static_cast<double>(l % 3) / 3.0;
    for (std::size_t k = 0; k < cfg_.vehicles_per_lane; ++k) {
      VehicleState v;
      v.id = next++;
      v.position = {30.0 + offset + cfg_.spacing * static_cast<double>(k) + cfg_.position_jitter * jitter(rng), y};
      v.heading = 0.0;
      const double dv = cfg_.speed_jitter * jitter(rng);
      v.speed = cfg_.speed + dv;
      v.lane = road->lanes[l].id;
      IdmParameters p = cfg_.traffic.idm;
      p.v_desired = std::max(1.0, p.v_desired + dv);
      traffic_.set_idm(v.id, p);
      if (l == cfg_.agent_lane && k == cfg_.agent_slot) agent_ = v.id;
      world_.vehicles.push_back(v);
    }
  }
  relocate_lanes(world_);
  av_ = select_av_under_test(world_, agent_);
  av0_ = world_.at(av_).position;
  agent0_ = world_.at(agent_).position;
  t_ = 0;
  last_ = AdvStepInfo{};
  return observe();
}

Eigen::VectorXd AdvEnv::observe() const { return scale_adv_features(adv_state_features(world_, agent_, av_)); }

Eigen::VectorXd AdvEnv::auxiliary() const {
  return scale_gail_features(gail_state_features(world_, agent_).values);
}

StepResult AdvEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != 2) throw ShapeError("adversarial action must have 2 entries");
  auto controls = traffic_.controls(world_, {agent_});
  const ControlAction a = kAdversarialBounds.clamp({action[0], action[1]});
  controls[agent_] = a;
  auto [next, events] = step_world(world_, controls, cfg_.sim);
  world_ = std::move(next);
  ++t_;
  last_ = AdvStepInfo{};
  last_.agent_action = a;
  last_.controls = std::move(controls);
  last_.r_d = distance_reward(av0_, agent0_, world_.at(av_).position, world_.at(agent_).position);
  last_.r_c = collision_reward(events, agent_, av_);
  last_.r_adv = adversarial_reward(last_.r_d, last_.r_c);
  last_.events = std::move(events);
  last_.termination = episode_done(world_, agent_, last_.events, cfg_.sim);

  StepResult r;
  r.reward = last_.r_adv;
  r.done = last_.termination && *last_.termination != Termination::kHorizon;
  r.truncated = last_.termination == Termination::kHorizon;
  r.obs = observe();
  return r;
}

namespace {

// d KL(prior || policy) / d (policy mean, policy logvar), per dimension.
void kl_grad(const Eigen::VectorXd& gm, const Eigen::VectorXd& glv, const Eigen::VectorXd& pm,
             const Eigen::VectorXd& plv, Eigen::VectorXd& d_mean, Eigen::VectorXd& d_logvar) {
  const Eigen::ArrayXd var_p = plv.array().exp();
  const Eigen::ArrayXd var_g = glv.array().exp();
  const Eigen::ArrayXd diff = pm.array() - gm.array();
  d_mean = (diff / var_p).matrix();
  d_logvar = (0.5 * (1.0 - (var_g + diff.square()) / var_p)).matrix();
}

struct EpisodeAccumulator {
  int steps = 0;
  double r_adv = 0.0;
  double r_nat = 0.0;
};

}  // namespace

AdvTrainingResult train_adversarial(AdvEnv& env, const GaussianPolicy& prior, PpoAgent& agent,
                                    const TrainingConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const AdvRewardConfig rc{cfg.initial_kl_M, cfg.balance_w};
  rc.validate();
  AdvTrainingResult result;
  std::map<int, EpisodeAccumulator> open;
  Eigen::MatrixXd prior_mean, prior_logvar;  // per buffer column, refreshed before each update

  PpoHooks hooks;
  hooks.before_update = [&](RolloutBuffer& buf) {
    const auto n = static_cast<Eigen::Index>(buf.size());
    Eigen::MatrixXd aux(buf.steps.front().aux.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) aux.col(i) = buf.steps[static_cast<std::size_t>(i)].aux;
    const auto g = prior.forward(aux);
    prior_mean = g.mean;
    prior_logvar = g.logvar;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& s = buf.steps[static_cast<std::size_t>(i)];
      const double r_nat = naturalness_reward(g.mean.col(i), g.logvar.col(i), s.mean, s.logvar, rc.M);
      const double r_adv = s.env_reward;
      s.reward = total_reward(r_adv, r_nat, rc.balance_w);
      ++result.steps_checked;
      const bool ok = r_adv >= -2.0 && r_adv <= 2.0 && r_nat >= 0.0 && r_nat <= 1.0 &&
                      s.reward == r_adv + rc.balance_w * r_nat;
      if (!ok) ++result.contract_violations;
      auto& acc = open[s.episode];
      ++acc.steps;
      acc.r_adv += r_adv;
      acc.r_nat += r_nat;
      if (s.done || s.truncated) {
        result.episodes.push_back({s.episode, acc.steps, acc.r_adv / acc.steps, acc.r_nat / acc.steps});
        open.erase(s.episode);
      }
    }
  };
  if (rc.balance_w > 0.0) {
    hooks.actor_extra = [&](const RolloutBuffer&, const std::vector<std::size_t>& idx,
                            const GaussianPolicy::Output& out, double scale, Eigen::MatrixXd& g_mean,
                            Eigen::MatrixXd& g_logvar) {
      const double c = rc.balance_w * scale / (static_cast<double>(idx.size()) * rc.M);
      Eigen::VectorXd dm, dl;
      for (std::size_t j = 0; j < idx.size(); ++j) {
        const auto col = static_cast<Eigen::Index>(j);
        const auto b = static_cast<Eigen::Index>(idx[j]);
        const double kl = diag_gaussian_kl(prior_mean.col(b), prior_logvar.col(b).array().exp().matrix(),
                                           out.mean.col(col), out.logvar.col(col).array().exp().matrix());
        if (!(kl > 0.0 && kl < rc.M)) continue;  // flat outside the clip
        kl_grad(prior_mean.col(b), prior_logvar.col(b), out.mean.col(col), out.logvar.col(col), dm, dl);
        g_mean.col(col) += c * dm;
        g_logvar.col(col) += c * dl;
      }
    };
  }
  result.ppo = train_ppo(env, agent, cfg, rng, hooks);
  std::sort(result.episodes.begin(), result.episodes.end(),
            [](const AdvEpisodeStats& a, const AdvEpisodeStats& b) { return a.episode < b.episode; });
  return result;
}

std::string adv_training_csv(const AdvTrainingResult& r) {
  std::string out = "episode,steps,mean_R_adv,mean_R_nat\n";
  char line[128];
  for (const auto& e : r.episodes) {
    std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g\n", e.episode, e.steps, e.mean_r_adv, e.mean_r_nat);
    out += line;
  }
  return out;
}

std::vector<CollisionEvent> ScenarioRecord::collisions() const {
  std::vector<CollisionEvent> out;
  for (const auto& s : steps) out.insert(out.end(), s.events.begin(), s.events.end());
  return out;
}

bool ScenarioRecord::agent_hit_av() const {
  for (const auto& s : steps) {
    if (collision_reward(s.events, agent, av) == 1) return true;
  }
  return false;
}

bool ScenarioRecord::agent_hit_other() const {
  for (const auto& s : steps) {
    for (const auto& ev : s.events) {
      const auto o = ev.other(agent);
      if (o && *o != av) return true;
    }
  }
  return false;
}

std::vector<ScenarioRecord> generate_scenarios(const GaussianPolicy& policy, const GaussianPolicy& prior,
                                               AdvEnv& env, const GenerationConfig& cfg) {
  if (cfg.runs < 1) throw DomainError("generate needs at least one run");
  cfg.reward.validate();
  std::vector<ScenarioRecord> out;
  out.reserve(static_cast<std::size_t>(cfg.runs));
  const Eigen::VectorXd lo = env.action_low(), hi = env.action_high();
  for (int run = 0; run < cfg.runs; ++run) {
    ScenarioRecord rec;
    rec.run = run;
    rec.seed = cfg.seed + static_cast<std::uint64_t>(run);
    Eigen::VectorXd obs = env.reset(rec.seed);
    rec.agent = env.agent();
    rec.av = env.av();
    rec.initial = env.world().vehicles;
    for (int t = 0;; ++t) {
      const auto out_pi = policy.forward(Eigen::MatrixXd(obs));
      const auto out_g = prior.forward(Eigen::MatrixXd(env.auxiliary()));
      const double r_nat = naturalness_reward(out_g.mean.col(0), out_g.logvar.col(0), out_pi.mean.col(0),
                                              out_pi.logvar.col(0), cfg.reward.M);
      Eigen::VectorXd a = out_pi.mean.col(0);
      if (cfg.stochastic) {
        std::mt19937_64 rng(noise_seed(cfg.seed, run, t));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += std::exp(0.5 * out_pi.logvar(i, 0)) * gauss(rng);
      }
      a = a.cwiseMax(lo).cwiseMin(hi);
      const StepResult r = env.step(a);
      const AdvStepInfo& info = env.last_step();
      ScenarioStep st;
      st.snapshot.step = t + 1;
      st.snapshot.vehicles = env.world().vehicles;
      st.snapshot.controls = info.controls;
      st.r_adv = info.r_adv;
      st.r_nat = r_nat;
      st.r_t = total_reward(info.r_adv, r_nat, cfg.reward.balance_w);
      st.events = info.events;
      rec.steps.push_back(std::move(st));
      if (r.done || r.truncated) {
        rec.termination = info.termination.value_or(Termination::kHorizon);
        break;
      }
      obs = r.obs;
    }
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

Termination termination_from_string(const std::string& s) {
  for (auto t : {Termination::kEgoCollision, Termination::kOffRoad, Termination::kHorizon}) {
    if (to_string(t) == s) return t;
  }
  throw ParseError("unknown termination '" + s + "'", 0);
}

json control_json(const ControlAction& c) { return {{"accel", c.acceleration}, {"steering", c.steering}}; }

}  // namespace

void write_scenarios_jsonl(std::ostream& os, const std::vector<ScenarioRecord>& records) {
  for (const auto& rec : records) {
    for (std::size_t i = 0; i < rec.steps.size(); ++i) {
      const auto& s = rec.steps[i];
      json j;
      j["run"] = rec.run;
      j["step"] = s.snapshot.step;
      if (i == 0) {
        j["seed"] = rec.seed;
        j["agent"] = rec.agent;
        j["av"] = rec.av;
        json init = json::array();
        for (const auto& v : rec.initial) init.push_back(vehicle_to_json(v));
        j["initial"] = std::move(init);
      }
      json veh = json::array();
      for (const auto& v : s.snapshot.vehicles) veh.push_back(vehicle_to_json(v));
      j["vehicles"] = std::move(veh);
      json ctl = json::array();
      for (const auto& [id, c] : s.snapshot.controls) {
        json e = control_json(c);
        e["id"] = id;
        ctl.push_back(std::move(e));
      }
      j["controls"] = std::move(ctl);
      j["r_adv"] = s.r_adv;
      j["r_nat"] = s.r_nat;
      j["r_t"] = s.r_t;
      json ev = json::array();
      for (const auto& e : s.events) ev.push_back(collision_to_json(e));
      j["events"] = std::move(ev);
      if (i + 1 == rec.steps.size()) j["termination"] = to_string(rec.termination);
      os << j.dump() << '\n';
    }
  }
}

std::vector<ScenarioRecord> read_scenarios_jsonl(std::istream& is) {
  std::vector<ScenarioRecord> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const int run = j.at("run").get<int>();
      if (j.contains("seed")) {
        ScenarioRecord rec;
        rec.run = run;
        rec.seed = j.at("seed").get<std::uint64_t>();
        rec.agent = j.at("agent").get<VehicleId>();
        rec.av = j.at("av").get<VehicleId>();
        for (const auto& v : j.at("initial")) rec.initial.push_back(vehicle_from_json(v));
        out.push_back(std::move(rec));
      }
      if (out.empty() || out.back().run != run) throw ParseError("step line before its run header", row);
      ScenarioRecord& rec = out.back();
      ScenarioStep st;
      st.snapshot.step = j.at("step").get<std::int64_t>();
      for (const auto& v : j.at("vehicles")) st.snapshot.vehicles.push_back(vehicle_from_json(v));
      for (const auto& c : j.at("controls")) {
        st.snapshot.controls[c.at("id").get<VehicleId>()] = {c.at("accel").get<double>(),
                                                              c.at("steering").get<double>()};
      }
      st.r_adv = j.at("r_adv").get<double>();
      st.r_nat = j.at("r_nat").get<double>();
      st.r_t = j.at("r_t").get<double>();
      for (const auto& e : j.at("events")) st.events.push_back(collision_from_json(e));
      rec.steps.push_back(std::move(st));
      if (j.contains("termination")) rec.termination = termination_from_string(j.at("termination").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(std::string("scenario line: ") + e.what(), row);
    }
  }
  return out;
}

json scenario_summary_json(const std::vector<ScenarioRecord>& records) {
  json runs = json::array();
  for (const auto& r : records) {
    runs.push_back({{"run", r.run},
                    {"seed", r.seed},
                    {"agent", r.agent},
                    {"av", r.av},
                    {"steps", r.steps.size()},
                    {"termination", to_string(r.termination)},
                    {"agent_av_collision", r.agent_hit_av()},
                    {"agent_other_collision", r.agent_hit_other()}});
  }
  return {{"runs", std::move(runs)}};
}

}  // namespace natadv
