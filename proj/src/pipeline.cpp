#include "natadv/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "natadv/adversarial.hpp"
#include "natadv/analysis.hpp"
#include "natadv/calibration.hpp"
#include "natadv/error.hpp"
#include "natadv/gail.hpp"
#include "natadv/preprocess.hpp"
#include "natadv/scene.hpp"

namespace natadv {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json without_seed(json j) {
  j.erase("seed");
  return j;
}


}  // namespace

json default_config() {
  const SyntheticTrafficConfig sc;
  const ExpertRules er;
  const AdvSceneConfig scene;
  json j;
  j["seed"] = 1;
  j["data"] = {{"trajectories", ""}, {"schema", "canonical"}, {"road", ""}, {"screening", "ngsim"}};
  j["synthetic"] = {{"lanes", sc.lanes},
                    {"road_length", sc.road_length},
                    {"lane_width", sc.lane_width},
                    {"vehicles_per_lane", sc.vehicles_per_lane},
                    {"initial_spacing", sc.initial_spacing},
                    {"initial_speed", sc.initial_speed},
                    {"duration_s", 90.0},
                    {"speed_heterogeneity", sc.speed_heterogeneity},
                    {"position_noise_std", sc.position_noise_std},
                    {"accel_noise_std", 0.5},
                    {"steering_noise_std", 0.1},
                    {"idm", to_json(sc.driver.idm)},
                    {"mobil", to_json(sc.driver.mobil)}};
  j["screening"] = json::object();
  j["preprocess"] = {{"sema_width_s", 0.5}};
  j["ga"] = without_seed(to_json(GaConfig{}));
  j["expert"] = {{"scenario_steps", er.scenario_steps},
                 {"scenarios_per_vehicle", er.scenarios_per_vehicle},
                 {"max_initial_vehicles", er.max_initial_vehicles},
                 {"min_initial_mean_speed", er.min_initial_mean_speed}};
  j["gail"] = without_seed(to_json(TrainingConfig{}));
  j["adversarial"] = without_seed(to_json(TrainingConfig{}));
  json sj = to_json(scene);
  sj.erase("idm");
  sj.erase("mobil");
  j["scene"] = sj;
  j["generation"] = {{"runs", 100}, {"stochastic", true}};
  j["analysis"] = {{"clusters", 10}, {"w_N", nullptr}, {"w_A", nullptr}};
  return j;
}

namespace {

std::vector<std::string> split_path(const std::string& key) {
  std::vector<std::string> parts;
  std::stringstream ss(key);
  std::string p;
  while (std::getline(ss, p, '.')) parts.push_back(p);
  return parts;
}

// Unknown keys (relative to the defaults) are schema errors.
void merge_checked(json& base, const json& patch, const std::string& path) {
  if (!patch.is_object()) throw SchemaError("config" + path + ": expected an object");
  for (const auto& [k, v] : patch.items()) {
    const std::string p = path + "." + k;
    if (!base.contains(k)) throw SchemaError("config" + p + ": unknown key");
    json& slot = base[k];
    if (slot.is_object() && !slot.empty()) {
      merge_checked(slot, v, p);
    } else if (slot.is_object()) {
      slot = v;  // free-form section
    } else {
      slot = v;
    }
  }
}

}  // namespace

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw SchemaError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  const auto parts = split_path(key);
  json* node = &config;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (!node->is_object()) throw SchemaError("override path '" + key + "' does not name a config key");
    const bool free_form = node->empty() && i > 0;
    if (!node->contains(parts[i]) && !free_form) {
      throw SchemaError("override path '" + key + "' does not name a config key");
    }
    node = &(*node)[parts[i]];
  }
  *node = value;
}

json resolve_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides,
                    std::optional<std::uint64_t> seed) {
  json cfg = default_config();
  if (file) {
    if (!fs::exists(*file)) throw NotFoundError("config file '" + file->string() + "' does not exist");
    json user;
    try {
      user = json::parse(read_file(*file));
    } catch (const json::exception& e) {
      throw SchemaError("config file '" + file->string() + "': " + e.what());
    }
    merge_checked(cfg, user, "");
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  if (seed) cfg["seed"] = *seed;
  return cfg;
}

std::string content_digest(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_hash(const json& config) { return content_digest(config.dump()); }

void write_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw InvalidStateError("cannot write '" + tmp.string() + "'");
    os << bytes;
    if (!os) throw InvalidStateError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NotFoundError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace {

int log_level() {
  const char* v = std::getenv("NATADV_LOG_LEVEL");
  if (!v) return 1;
  const std::string s(v);
  if (s == "quiet" || s == "0") return 0;
  if (s == "debug" || s == "2") return 2;
  return 1;
}

void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[natadv] " << msg << '\n';
}

struct Stage {
  const CommandContext& ctx;
  std::string command;
  std::map<std::string, std::string> inputs;     // name -> digest
  std::map<std::string, std::string> artifacts;  // name -> digest

  std::uint64_t seed() const { return ctx.config.at("seed").get<std::uint64_t>(); }
  const json& cfg(const char* section) const { return ctx.config.at(section); }
  fs::path path(const std::string& name) const { return ctx.out / name; }

  // Reads an upstream artifact, naming its producer when it is missing.
  std::string input(const std::string& name, const std::string& producer) {
    const fs::path p = path(name);
    if (!fs::exists(p)) throw MissingArtifactError(p.string(), producer);
    std::string bytes = read_file(p);
    inputs[name] = content_digest(bytes);
    return bytes;
  }
  std::string external_input(const fs::path& p, const std::string& producer) {
    if (!fs::exists(p)) throw MissingArtifactError(p.string(), producer);
    std::string bytes = read_file(p);
    inputs[p.filename().string()] = content_digest(bytes);
    return bytes;
  }
  void output(const std::string& name, const std::string& bytes) {
    write_atomic(path(name), bytes);
    artifacts[name] = content_digest(bytes);
  }
  void finish() {
    json m = {{"command", command},
              {"version", kVersion},
              {"config_hash", config_hash(ctx.config)},
              {"seed", seed()},
              {"inputs", inputs},
              {"artifacts", artifacts}};
    write_atomic(path("manifest_" + command + ".json"), m.dump(2) + "\n");
  }
};

json parse_json(const std::string& bytes, const std::string& what) {
  try {
    return json::parse(bytes);
  } catch (const json::exception& e) {
    throw ParseError(what + ": " + e.what(), 0);
  }
}

SyntheticTrafficConfig synthetic_config(const json& j, std::uint64_t seed) {
  SyntheticTrafficConfig c;
  c.lanes = j.at("lanes").get<std::size_t>();
  c.road_length = j.at("road_length").get<double>();
  c.lane_width = j.at("lane_width").get<double>();
  c.vehicles_per_lane = j.at("vehicles_per_lane").get<std::size_t>();
  c.initial_spacing = j.at("initial_spacing").get<double>();
  c.initial_speed = j.at("initial_speed").get<double>();
  c.duration_s = j.at("duration_s").get<double>();
  c.speed_heterogeneity = j.at("speed_heterogeneity").get<double>();
  c.position_noise_std = j.at("position_noise_std").get<double>();
  c.driver.accel_noise_std = j.at("accel_noise_std").get<double>();
  c.driver.steering_noise_std = j.at("steering_noise_std").get<double>();
  c.driver.idm = idm_from_json(j.at("idm"));
  c.driver.mobil = mobil_from_json(j.at("mobil"));
  c.seed = seed;
  return c;
}

ScreeningRules screening_rules(const json& cfg) {
  const std::string preset = cfg.at("data").at("screening").get<std::string>();
  ScreeningRules r;
  if (preset == "ngsim") r = ScreeningRules::ngsim();
  else if (preset == "interaction") r = ScreeningRules::interaction();
  else throw SchemaError("config.data.screening: expected 'ngsim' or 'interaction'");
  const json& o = cfg.at("screening");
  r.min_duration_s = o.value("min_duration_s", r.min_duration_s);
  r.min_travel_m = o.value("min_travel_m", r.min_travel_m);
  r.trim_s = o.value("trim_s", r.trim_s);
  r.max_abs_accel = o.value("max_abs_accel", r.max_abs_accel);
  r.small_car_class = o.value("small_car_class", r.small_car_class);
  r.min_gap_m = o.value("min_gap_m", r.min_gap_m);
  r.exclude_far_right_lane = o.value("exclude_far_right_lane", r.exclude_far_right_lane);
  r.keep_lane_changes = o.value("keep_lane_changes", r.keep_lane_changes);
  r.validate();
  return r;
}

// Trajectories and road, either from the config or from synth-data.
struct Corpus {
  std::vector<Episode> episodes;
  std::shared_ptr<const RoadNetwork> road;
};

Corpus load_corpus(Stage& st) {
  const json& d = st.cfg("data");
  const std::string tpath = d.at("trajectories").get<std::string>();
  const std::string rpath = d.at("road").get<std::string>();
  Corpus c;
  const std::string text = tpath.empty() ? st.input("trajectories.csv", "synth-data")
                                         : st.external_input(tpath, "synth-data");
  c.episodes = parse_trajectories(text, schema_from_string(d.at("schema").get<std::string>()));
  const std::string road_text = rpath.empty() ? st.input("road.json", "synth-data") : st.external_input(rpath, "synth-data");
  c.road = std::make_shared<const RoadNetwork>(build_road(parse_json(road_text, "road")));
  bool missing = false;
  for (const auto& e : c.episodes) {
    for (const auto& r : e.records) missing = missing || !r.lane_id;
  }
  if (missing) c.episodes = infer_lane_and_leader(c.episodes, *c.road);
  return c;
}

json calibration_segment_json(const CalibrationSegment& s) {
  return {{"leader_rear", s.leader.rear_position},
          {"leader_speed", s.leader.speed},
          {"follower_front", s.follower_front},
          {"follower_speed", s.follower_speed},
          {"data_gaps", s.data_gaps},
          {"dt", s.dt}};
}

CalibrationSegment calibration_segment_from_json(const json& j) {
  CalibrationSegment s;
  s.leader.rear_position = j.at("leader_rear").get<std::vector<double>>();
  s.leader.speed = j.at("leader_speed").get<std::vector<double>>();
  s.follower_front = j.at("follower_front").get<double>();
  s.follower_speed = j.at("follower_speed").get<double>();
  s.data_gaps = j.at("data_gaps").get<std::vector<double>>();
  s.dt = j.at("dt").get<double>();
  return s;
}

json lane_change_json(const LaneChangeEvent& e) {
  return {{"vehicle_id", e.vehicle_id}, {"t_start", e.t_start}, {"t_end", e.t_end},
          {"from_lane", e.from_lane},   {"to_lane", e.to_lane},   {"peak_heading", e.peak_heading},
          {"a_c", e.a_c},               {"a_c_new", e.a_c_new},   {"a_n", e.a_n},
          {"a_n_new", e.a_n_new},       {"a_o", e.a_o},           {"a_o_new", e.a_o_new}};
}

LaneChangeEvent lane_change_from_json(const json& j) {
  LaneChangeEvent e;
  e.vehicle_id = j.at("vehicle_id").get<VehicleId>();
  e.t_start = j.at("t_start").get<double>();
  e.t_end = j.at("t_end").get<double>();
  e.from_lane = j.at("from_lane").get<int>();
  e.to_lane = j.at("to_lane").get<int>();
  e.peak_heading = j.at("peak_heading").get<double>();
  e.a_c = j.at("a_c").get<double>();
  e.a_c_new = j.at("a_c_new").get<double>();
  e.a_n = j.at("a_n").get<double>();
  e.a_n_new = j.at("a_n_new").get<double>();
  e.a_o = j.at("a_o").get<double>();
  e.a_o_new = j.at("a_o_new").get<double>();
  return e;
}

TrainingConfig training(const Stage& st, const char* section) {
  TrainingConfig t = training_from_json(st.cfg(section));
  t.seed = st.seed();
  return t;
}

json policy_checkpoint(const GaussianPolicy& p) { return checkpoint_json(p.net()); }
GaussianPolicy policy_from_checkpoint(const json& j) { return GaussianPolicy(mlp_from_checkpoint(j)); }

AdvSceneConfig scene_config(Stage& st) {
  AdvSceneConfig sc = adv_scene_from_json(st.cfg("scene"));
  const json idm = parse_json(st.input("idm.json", "calibrate-idm"), "idm.json");
  const json mobil = parse_json(st.input("mobil.json", "calibrate-mobil"), "mobil.json");
  sc.traffic.idm = idm_from_json(idm.at("idm"));
  sc.traffic.mobil = mobil_from_json(mobil.at("params"));
  sc.validate();
  return sc;
}

std::string cmd_synth_data(Stage& st) {
  const SyntheticTrafficConfig sc = synthetic_config(st.cfg("synthetic"), st.seed());
  const auto episodes = synthetic_episodes(sc);
  st.output("trajectories.csv", serialize_canonical(episodes));
  st.output("road.json", road_to_json(make_straight_road(sc.lanes, sc.road_length, sc.lane_width)).dump(2) + "\n");
  return std::to_string(episodes.size()) + " vehicle tracks";
}

std::string cmd_preprocess(Stage& st) {
  const Corpus c = load_corpus(st);
  const ScreeningRules rules = screening_rules(st.ctx.config);
  const PreprocessResult r =
      preprocess_corpus(c.episodes, rules, c.road.get(), st.cfg("preprocess").at("sema_width_s").get<double>());
  json segs = json::array();
  std::size_t dropped = 0;
  for (const auto& s : r.kept) {
    try {
      segs.push_back(calibration_segment_json(calibration_segment(s)));
    } catch (const Error&) {
      ++dropped;  // leader not recorded on every frame
    }
  }
  // smoothed ego tracks of the kept segments, one episode per vehicle
  std::map<VehicleId, Episode> filtered;
  for (const auto& s : r.kept) {
    Episode& e = filtered[s.vehicle_id];
    e.ego_id = s.vehicle_id;
    e.source = s.source;
    e.records.insert(e.records.end(), s.ego.begin(), s.ego.end());
  }
  std::vector<Episode> tracks;
  for (auto& [id, e] : filtered) {
    std::sort(e.records.begin(), e.records.end(), [](const auto& a, const auto& b) { return a.frame < b.frame; });
    tracks.push_back(std::move(e));
  }
  st.output("filtered_trajectories.csv", serialize_canonical(tracks));
  json lcs = json::array();
  for (const auto& e : r.lane_changes) lcs.push_back(lane_change_json(e));
  st.output("calibration_corpus.json", json{{"segments", segs}}.dump() + "\n");
  st.output("lane_changes.json", json{{"events", lcs}}.dump(2) + "\n");
  st.output("screening_report.csv", screening_report_csv(r.outcomes));
  if (dropped) log_info(std::to_string(dropped) + " kept segments lacked leader data and were dropped");
  return std::to_string(segs.size()) + " car-following segments kept of " + std::to_string(r.outcomes.size()) +
         ", " + std::to_string(lcs.size()) + " lane changes";
}

std::string cmd_calibrate_idm(Stage& st) {
  const json j = parse_json(st.input("calibration_corpus.json", "preprocess"), "calibration_corpus.json");
  std::vector<CalibrationSegment> corpus;
  for (const auto& s : j.at("segments")) corpus.push_back(calibration_segment_from_json(s));
  if (corpus.empty()) throw DomainError("no car-following segments survived screening; relax the screening rules");
  GaConfig ga = ga_from_json(st.cfg("ga"));
  ga.seed = st.seed();
  const IdmCalibration cal = calibrate_idm(corpus, IdmRanges{}, ga);
  st.output("idm.json", calibration_report(cal).dump(2) + "\n");
  char buf[96];
  std::snprintf(buf, sizeof buf, "objective %.4f on %zu segments", cal.best_per_generation.back(), corpus.size());
  return buf;
}

std::string cmd_calibrate_mobil(Stage& st) {
  const json j = parse_json(st.input("lane_changes.json", "preprocess"), "lane_changes.json");
  std::vector<LaneChangeEvent> events;
  for (const auto& e : j.at("events")) events.push_back(lane_change_from_json(e));
  const MobilParameters p = calibrate_mobil(events);
  st.output("mobil.json", json{{"params", to_json(p)}, {"events", events.size()}}.dump(2) + "\n");
  return std::to_string(events.size()) + " lane-change events";
}

std::string cmd_train_gail(Stage& st) {
  const Corpus c = load_corpus(st);
  auto scene = std::make_shared<const RecordedScene>(scene_from_episodes(c.episodes, c.road));
  const json& e = st.cfg("expert");
  ExpertRules rules;
  rules.scenario_steps = e.at("scenario_steps").get<int>();
  rules.scenarios_per_vehicle = e.at("scenarios_per_vehicle").get<int>();
  rules.max_initial_vehicles = e.at("max_initial_vehicles").get<int>();
  rules.min_initial_mean_speed = e.at("min_initial_mean_speed").get<double>();
  rules.seed = st.seed();
  const ExpertBuffer expert = collect_expert_trajectories(*scene, rules);
  if (expert.size() == 0) throw DomainError("no expert scenarios survived replay; provide longer or cleaner trajectories");
  const TrainingConfig tc = training(st, "gail");
  std::mt19937_64 rng(st.seed());
  GailReplayEnv env(scene, expert.scenarios, rules.scenario_steps);
  GailTrainer trainer(env.observation_dim(), tc, rng);
  const GailResult res = train_gail(env, trainer, expert, tc, rng);
  const GailEvaluation ev = evaluate_gail(env, trainer, expert, 20, st.seed() + 1);
  st.output("gail_prior.json", policy_checkpoint(trainer.generator.actor).dump() + "\n");
  st.output("gail_discriminator.json", checkpoint_json(trainer.discriminator.net()).dump() + "\n");
  st.output("gail_curves.csv", gail_curves_csv(res));
  st.output("gail_eval.json", json{{"disc_accuracy", ev.disc_accuracy},
                                   {"mean_kl", ev.mean_kl},
                                   {"policy_pairs", ev.policy_pairs},
                                   {"expert_pairs", expert.size()}}
                                      .dump(2) +
                                  "\n");
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu expert pairs, discriminator accuracy %.3f, KL %.3f", expert.size(),
                ev.disc_accuracy, ev.mean_kl);
  return buf;
}

std::string cmd_train_adv(Stage& st) {
  const GaussianPolicy prior =
      policy_from_checkpoint(parse_json(st.input("gail_prior.json", "train-gail"), "gail_prior.json"));
  AdvEnv env(scene_config(st));
  const TrainingConfig tc = training(st, "adversarial");
  std::mt19937_64 rng(st.seed());
  PpoAgent agent(env.observation_dim(), env.action_dim(), tc, rng);
  const AdvTrainingResult r = train_adversarial(env, prior, agent, tc, rng);
  st.output("adv_policy.json", policy_checkpoint(agent.actor).dump() + "\n");
  st.output("adv_training.csv", adv_training_csv(r));
  st.output("adv_updates.csv", training_log_csv(r.ppo.updates));
  if (r.contract_violations) throw InvalidStateError("reward contract violated on " + std::to_string(r.contract_violations) + " steps");
  return std::to_string(r.episodes.size()) + " episodes";
}

std::string cmd_generate(Stage& st) {
  const GaussianPolicy prior =
      policy_from_checkpoint(parse_json(st.input("gail_prior.json", "train-gail"), "gail_prior.json"));
  const GaussianPolicy policy =
      policy_from_checkpoint(parse_json(st.input("adv_policy.json", "train-adv"), "adv_policy.json"));
  AdvEnv env(scene_config(st));
  const TrainingConfig tc = training(st, "adversarial");
  GenerationConfig gc;
  gc.runs = st.cfg("generation").at("runs").get<int>();
  gc.stochastic = st.cfg("generation").at("stochastic").get<bool>();
  gc.seed = st.seed();
  gc.reward = {tc.initial_kl_M, tc.balance_w};
  const auto recs = generate_scenarios(policy, prior, env, gc);
  std::ostringstream os;
  write_scenarios_jsonl(os, recs);
  st.output("scenarios.jsonl", os.str());
  st.output("scenarios_summary.json", scenario_summary_json(recs).dump(2) + "\n");
  return std::to_string(recs.size()) + " runs";
}

std::string cmd_analyze(Stage& st) {
  const std::string bytes = st.input("scenarios.jsonl", "generate");
  const std::string hash = config_hash(st.ctx.config);
  for (const char* upstream : {"generate", "train-adv", "train-gail"}) {
    const fs::path m = st.path(std::string("manifest_") + upstream + ".json");
    if (!fs::exists(m)) continue;
    const json mj = parse_json(read_file(m), m.string());
    const std::string h = mj.value("config_hash", std::string());
    if (h != hash && !st.ctx.force) {
      throw InvalidStateError(std::string("inputs from '") + upstream + "' were produced under config hash " + h +
                              ", current config is " + hash + "; rerun that stage or pass --force");
    }
  }
  std::istringstream is(bytes);
  const auto recs = read_scenarios_jsonl(is);
  const MacroMetrics macro = macro_metrics(recs);
  const auto micro = micro_metrics(recs);
  const double nat = mean_naturalness(recs);
  json metrics = metrics_json(macro, micro, nat);
  const json& a = st.cfg("analysis");
  std::string text = metrics_text(macro, micro, nat);
  if (!a.at("w_N").is_null() && !a.at("w_A").is_null()) {
    const double e = effectiveness(nat, macro.collision_rate_av, a.at("w_N").get<double>(), a.at("w_A").get<double>());
    metrics["effectiveness"] = e;
    char buf[96];
    std::snprintf(buf, sizeof buf, "effectiveness           %.4f\n", e);
    text += buf;
  } else {
    metrics["effectiveness"] = nullptr;
    text += "effectiveness           not computed (set analysis.w_N and analysis.w_A)\n";
  }
  const ClusterReport cr = cluster_label_report(recs, a.at("clusters").get<int>(), st.seed());
  st.output("metrics.json", metrics.dump(2) + "\n");
  st.output("metrics.txt", text);
  st.output("clusters.json", cluster_report_json(cr).dump(2) + "\n");
  for (const auto& [role, s] : micro) {
    st.output("hist_" + to_string(role) + "_accel.csv", histogram_csv(s.accel_hist));
    st.output("hist_" + to_string(role) + "_steering.csv", histogram_csv(s.steering_hist));
  }
  char buf[128];
  std::snprintf(buf, sizeof buf, "%zu runs, AV collision rate %.3f, %zu agent collisions", macro.runs,
                macro.collision_rate_av, cr.events.size());
  return buf;
}

}  // namespace

std::string run_command(const std::string& command, const CommandContext& ctx) {
  Stage st{ctx, command, {}, {}};
  fs::create_directories(ctx.out);
  std::string summary;
  try {
    if (command == "synth-data") summary = cmd_synth_data(st);
    else if (command == "preprocess") summary = cmd_preprocess(st);
    else if (command == "calibrate-idm") summary = cmd_calibrate_idm(st);
    else if (command == "calibrate-mobil") summary = cmd_calibrate_mobil(st);
    else if (command == "train-gail") summary = cmd_train_gail(st);
    else if (command == "train-adv") summary = cmd_train_adv(st);
    else if (command == "generate") summary = cmd_generate(st);
    else if (command == "analyze") summary = cmd_analyze(st);
    else throw SchemaError("unknown command '" + command + "'");
  } catch (const json::exception& e) {
    throw SchemaError(command + ": " + e.what());
  }
  st.finish();
  return summary;
}

}  // namespace natadv
