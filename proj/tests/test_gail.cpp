#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "natadv/error.hpp"
#include "natadv/gail.hpp"

using namespace natadv;

namespace {

VehicleState car(VehicleId id, double x, double y, double speed = 0.0) {
  VehicleState v;
  v.id = id;
  v.position = {x, y};
  v.speed = speed;
  return v;
}

WorldState world_on(std::size_t lanes, std::vector<VehicleState> vs) {
  WorldState w;
  w.road = std::make_shared<RoadNetwork>(make_straight_road(lanes, 2000));
  w.vehicles = std::move(vs);
  relocate_lanes(w);
  return w;
}

// `count` vehicles in lane 1 (y = 3.7 on a 3-lane road) at 10 m/s; vehicle k
// is present in frames [0, lengths[k]).
RecordedScene platoon_scene(const std::vector<std::size_t>& lengths) {
  RecordedScene s;
  s.road = std::make_shared<RoadNetwork>(make_straight_road(3, 5000));
  const std::size_t frames = *std::max_element(lengths.begin(), lengths.end());
  for (std::size_t f = 0; f < frames; ++f) {
    StepSnapshot snap;
    snap.step = static_cast<std::int64_t>(f);
    for (std::size_t k = 0; k < lengths.size(); ++k) {
      if (f >= lengths[k]) continue;
      auto v = car(static_cast<VehicleId>(k + 1), 20.0 * k + f * 1.0, 3.7, 10.0);
      v.lane = s.road->lanes[1].id;
      snap.vehicles.push_back(v);
      snap.controls[v.id] = {0.0, 0.0};
    }
    s.frames.push_back(snap);
  }
  return s;
}

}  // namespace

TEST(Features, LoneEgo) {
  const auto w = world_on(3, {car(1, 100, 3.7)});
  const auto f = gail_state_features(w, 1);
  ASSERT_EQ(f.values.size(), 56);
  EXPECT_FALSE(f.off_lane);
  EXPECT_EQ(f.values[0], kDefaultVehicleLength);
  EXPECT_EQ(f.values[1], kDefaultVehicleWidth);
  for (int i = 2; i < 56; ++i) EXPECT_NEAR(f.values[i], 0.0, 1e-12) << i;
}

TEST(Features, OneNeighborAhead) {
  const auto w = world_on(3, {car(1, 100, 3.7, 10), car(2, 105, 3.7, 10)});
  const auto f = gail_state_features(w, 1);
  const auto rel = relative_features(w.vehicles[0], w.vehicles[1]);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(f.values[6 + i], rel[i], 1e-12);
  EXPECT_NEAR(f.values[7], 5.0, 1e-12);
  for (int i = 11; i < 56; ++i) EXPECT_EQ(f.values[i], 0.0);
}

TEST(Features, OnlyTenNearest) {
  std::vector<VehicleState> vs{car(1, 100, 3.7, 10)};
  for (int k = 1; k <= 11; ++k) vs.push_back(car(k + 1, 100 + 4.0 * k * (k % 2 ? 1 : -1), k % 3 * 3.7, 10));
  const auto w = world_on(3, vs);
  const auto f = gail_state_features(w, 1);
  const auto nb = neighbors(w, 1, 50.0);
  ASSERT_EQ(nb.size(), 11u);
  // the farthest neighbor is left out
  const auto& last = *w.find(nb[9].first);
  const auto rel = relative_features(w.vehicles[0], last);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(f.values[6 + 45 + i], rel[i], 1e-12);
}

TEST(Features, PermutationInvariant) {
  std::vector<VehicleState> vs;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> x(50, 150), y(-1, 8), s(5, 15);
  for (int k = 0; k < 14; ++k) vs.push_back(car(k + 1, x(rng), y(rng), s(rng)));
  const auto ref = gail_state_features(world_on(3, vs), 1).values;
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(vs.begin(), vs.end(), rng);
    EXPECT_EQ(gail_state_features(world_on(3, vs), 1).values, ref);
  }
}

TEST(Features, OffLaneIsFlagged) {
  const auto w = world_on(2, {car(1, 100, -4.0)});
  const auto f = gail_state_features(w, 1);
  EXPECT_TRUE(f.off_lane);
  EXPECT_NEAR(f.values[2], -4.0, 1e-9);
}

TEST(Expert, ScenarioSelection) {
  ExpertRules rules;
  EXPECT_TRUE(select_expert_scenarios(platoon_scene({39}), rules).empty());
  const auto four = select_expert_scenarios(platoon_scene({400}), rules);
  ASSERT_EQ(four.size(), 4u);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_GE(four[k].start_frame, four[k - 1].start_frame + 100);
  const auto many = select_expert_scenarios(platoon_scene({1000}), rules);
  ASSERT_EQ(many.size(), 4u);
  for (std::size_t k = 1; k < 4; ++k) EXPECT_GE(many[k].start_frame, many[k - 1].start_frame + 100);
  EXPECT_LE(many.back().start_frame + 100, 1000u);
}

TEST(Expert, CrowdedStartIsSkipped) {
  ExpertRules rules;
  EXPECT_EQ(select_expert_scenarios(platoon_scene(std::vector<std::size_t>(40, 100)), rules).size(), 40u);
  EXPECT_TRUE(select_expert_scenarios(platoon_scene(std::vector<std::size_t>(41, 100)), rules).empty());
}

TEST(Expert, CollectPairs) {
  ExpertRules rules;
  const auto buf = collect_expert_trajectories(platoon_scene({200, 200}), rules);
  EXPECT_EQ(buf.size(), 400u);
  for (const auto& s : buf.states) EXPECT_EQ(s.size(), 56);
  for (const auto& a : buf.actions) EXPECT_TRUE(kExpertBounds.contains({a[0], a[1]}));
  const auto back = expert_buffer_from_json(nlohmann::json::parse(expert_buffer_json(buf).dump()));
  EXPECT_EQ(back.states, buf.states);
  EXPECT_EQ(back.actions, buf.actions);
}

TEST(Discriminator, LossExamples) {
  EXPECT_NEAR(discriminator_loss({1 - 1e-9}, {1e-9}), 0.0, 1e-8);
  EXPECT_NEAR(discriminator_loss({0.5, 0.5}, {0.5, 0.5}), 2 * std::log(2.0), 1e-15);
  EXPECT_NEAR(2 * std::log(2.0), 1.386, 1e-3);
  EXPECT_EQ(discriminator_accuracy({0.9, 0.2}, {0.1, 0.7}), 0.5);
  EXPECT_THROW(discriminator_loss({1.0}, {0.5}), DomainError);
  EXPECT_THROW(discriminator_loss({0.5}, {0.0}), DomainError);
}

TEST(Discriminator, Reward) {
  EXPECT_EQ(gail_reward(1.0), 0.0);
  EXPECT_NEAR(gail_reward(std::exp(-1.0)), 1.0, 1e-15);
  EXPECT_NEAR(gail_reward(0.0), -std::log(1e-8), 1e-12);
  EXPECT_NEAR(gail_reward(0.0), 18.42, 1e-2);
  for (double d = 0.0; d <= 1.0; d += 0.01) {
    EXPECT_GE(gail_reward(d), 0.0);
    EXPECT_LE(gail_reward(d), -std::log(kGailRewardFloor));
  }
  EXPECT_NEAR(gail_reward(1.0 - 1e-12), 0.0, 1e-11);
}

TEST(Discriminator, InitialAccuracyNearHalf) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    Discriminator d(56, 2, {128, 128}, 1e-4, rng);
    Eigen::MatrixXd gen(58, 256), exp(58, 256);
    for (Eigen::Index i = 0; i < gen.size(); ++i) {
      gen.data()[i] = n01(rng);
      exp.data()[i] = n01(rng);
    }
    const auto pg = d.probability(gen), pe = d.probability(exp);
    const double acc = discriminator_accuracy(std::vector<double>(pg.data(), pg.data() + pg.size()),
                                              std::vector<double>(pe.data(), pe.data() + pe.size()));
    EXPECT_NEAR(acc, 0.5, 0.1);
  }
}

TEST(Discriminator, LearnsSeparableData) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n01(0.0, 1.0);
  Discriminator d(3, 1, {16}, 1e-2, rng);
  Eigen::MatrixXd gen(4, 64), exp(4, 64);
  for (Eigen::Index i = 0; i < gen.size(); ++i) {
    gen.data()[i] = n01(rng) + 2.0;
    exp.data()[i] = n01(rng) - 2.0;
  }
  double first = 0, last = 0;
  for (int s = 0; s < 200; ++s) {
    const auto [loss, acc] = d.train_step(gen, exp);
    if (s == 0) first = loss;
    last = loss;
    (void)acc;
  }
  EXPECT_LT(last, first);
  EXPECT_GT(d.train_step(gen, exp).second, 0.95);
}

TEST(Training, ZeroEpisodesKeepsGenerator) {
  const auto scene = std::make_shared<RecordedScene>(platoon_scene({200, 200, 200}));
  ExpertRules rules;
  const auto expert = collect_expert_trajectories(*scene, rules);
  GailReplayEnv env(scene, select_expert_scenarios(*scene, rules));
  TrainingConfig cfg;
  cfg.max_episodes = 0;
  cfg.hidden = {16};
  std::mt19937_64 rng(1);
  GailTrainer trainer(env.observation_dim(), cfg, rng);
  const Eigen::VectorXd before = trainer.generator.actor.net().params();
  const auto res = train_gail(env, trainer, expert, cfg, rng);
  EXPECT_TRUE(res.curve.empty());
  EXPECT_EQ(trainer.generator.actor.net().params(), before);
}

TEST(ReplayEnv, BackgroundReplaysRecording) {
  const auto scene = std::make_shared<RecordedScene>(platoon_scene({200, 200}));
  GailReplayEnv env(scene, {{1, 0}});
  env.reset(1);
  Eigen::VectorXd brake(2);
  brake << -5.0, 0.0;
  for (int t = 0; t < 5; ++t) env.step(brake);
  // vehicle 2 follows its recording regardless of the ego
  const auto* other = env.world().find(2);
  ASSERT_NE(other, nullptr);
  EXPECT_NEAR(other->position.x, scene->frames[5].vehicles[1].position.x, 1e-9);
  EXPECT_LT(env.world().find(1)->speed, 10.0);
}
