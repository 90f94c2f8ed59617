#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "natadv/analysis.hpp"
#include "natadv/error.hpp"
#include "support/fixtures.hpp"

using namespace natadv;

namespace {

constexpr VehicleId kAgent = 1, kAv = 2, kBg = 3;

// A run of `steps` frames with constant controls; `last` events land on the
// final step.
ScenarioRecord run_with(int steps, std::vector<CollisionEvent> last = {}, ControlAction agent_ctl = {0.5, 0.01}) {
  ScenarioRecord r;
  r.agent = kAgent;
  r.av = kAv;
  r.initial = {fixture::car(kAgent, 0, 0, 0, 10), fixture::car(kAv, 20, 3.7, 0, 10), fixture::car(kBg, 40, 0, 0, 10)};
  for (auto& v : r.initial) v.lane = 0;
  for (int t = 0; t < steps; ++t) {
    ScenarioStep s;
    s.snapshot.step = t;
    s.snapshot.vehicles = r.initial;
    s.snapshot.controls = {{kAgent, agent_ctl}, {kAv, {1.0, 0.0}}, {kBg, {-0.5, 0.0}}};
    s.r_nat = 0.5;
    r.steps.push_back(s);
  }
  if (!r.steps.empty()) r.steps.back().events = std::move(last);
  return r;
}

CollisionEvent hit(VehicleId a, VehicleId b) {
  return fixture::contact(fixture::car(a, 0, 0, 0, 15), fixture::car(b, 4.8, 0, 0, 10));
}

double reconstruction_error(const Eigen::MatrixXd& X, const PcaResult& p) {
  const Eigen::MatrixXd back = (p.scores * p.basis.transpose()).rowwise() + p.mean.transpose();
  return (back - X).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd gaussian(int n, int d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = n01(rng);
  return X;
}

}  // namespace

TEST(Macro, NoCollisions) {
  const std::vector<ScenarioRecord> rs(10, run_with(5));
  const auto m = macro_metrics(rs);
  EXPECT_EQ(m.runs, 10u);
  EXPECT_EQ(m.collision_rate_av, 0.0);
  EXPECT_EQ(m.collision_rate_other, 0.0);
  EXPECT_EQ(m.lane_change_count, 0u);
  EXPECT_THROW(macro_metrics({}), DomainError);
}

TEST(Macro, HalfTheRunsHitTheAv) {
  std::vector<ScenarioRecord> rs{run_with(5, {hit(kAgent, kAv)}), run_with(5), run_with(5, {hit(kAv, kAgent)}),
                                 run_with(5, {hit(kAgent, kBg)})};
  const auto m = macro_metrics(rs);
  EXPECT_EQ(m.collision_rate_av, 0.5);
  EXPECT_EQ(m.collision_rate_other, 0.25);
  // a collision between two non-agent vehicles counts for neither
  EXPECT_EQ(macro_metrics({run_with(5, {hit(kAv, kBg)})}).collision_rate_av, 0.0);
}

TEST(Macro, LaneChanges) {
  auto r = run_with(6);
  const std::vector<std::optional<int>> lanes{0, 1, 1, std::nullopt, 0, 0};
  for (std::size_t t = 0; t < lanes.size(); ++t) r.steps[t].snapshot.vehicles[0].lane = lanes[t];
  // 0 -> 1, then 1 -> (off road) -> 0
  EXPECT_EQ(lane_changes(r), 2u);
  EXPECT_EQ(macro_metrics({r, r, run_with(3)}).lane_change_count, 4u);
}

TEST(Micro, ConstantActionsGiveDegenerateRanges) {
  const auto m = micro_metrics({run_with(20), run_with(7)});
  const auto& ag = m.at(Role::kAgent);
  EXPECT_EQ(ag.samples, 27u);
  EXPECT_EQ(ag.accel_range, std::make_pair(0.5, 0.5));
  EXPECT_EQ(ag.steering_range, std::make_pair(0.01, 0.01));
  EXPECT_EQ(m.at(Role::kAv).accel_range, std::make_pair(1.0, 1.0));
  EXPECT_EQ(m.at(Role::kBackground).accel_range, std::make_pair(-0.5, -0.5));
  EXPECT_EQ(ag.accel_hist.counts.size(), 1u);
  EXPECT_NEAR(ag.accel_hist.density(0), 1.0 / kAccelBinWidth, 1e-12);
}

TEST(Micro, UniformActionsGiveFlatHistogram) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> acc(-4.0, 4.0), steer(-0.5, 0.5);
  std::vector<ScenarioRecord> rs;
  for (int k = 0; k < 40; ++k) {
    auto r = run_with(500);
    for (auto& s : r.steps) s.snapshot.controls[kAgent] = {acc(rng), steer(rng)};
    rs.push_back(std::move(r));
  }
  const auto micro = micro_metrics(rs);
  const auto& ag = micro.at(Role::kAgent);
  const double n = static_cast<double>(ag.samples);
  ASSERT_EQ(ag.samples, 20000u);
  EXPECT_GE(ag.accel_range.first, -4.0);
  EXPECT_LE(ag.accel_range.second, 4.0);
  // 32 acceleration bins and 20 steering bins over the support
  ASSERT_EQ(ag.accel_hist.counts.size(), 32u);
  ASSERT_EQ(ag.steering_hist.counts.size(), 20u);
  for (const auto& [h, bins] : {std::pair{&ag.accel_hist, 32.0}, std::pair{&ag.steering_hist, 20.0}}) {
    const double p = 1.0 / bins, se = std::sqrt(n * p * (1 - p));
    for (std::size_t b = 0; b < h->counts.size(); ++b) EXPECT_NEAR(h->counts[b], n * p, 4 * se) << b;
    double integral = 0.0;
    for (std::size_t b = 0; b < h->counts.size(); ++b) integral += h->density(b) * h->bin_width;
    EXPECT_NEAR(integral, 1.0, 1e-12);
  }
}

TEST(Micro, HistogramBinsAlignToWidth) {
  const auto h = make_histogram({-0.3, 0.0, 0.24, 0.25, 0.74}, 0.25);
  EXPECT_NEAR(h.origin, -0.5, 1e-15);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{1, 0, 2, 1, 1}));
  EXPECT_THROW(make_histogram({1.0}, 0.0), DomainError);
  EXPECT_TRUE(make_histogram({}, 0.1).counts.empty());
}

TEST(Micro, MeanNaturalness) {
  auto a = run_with(4), b = run_with(2);
  for (auto& s : b.steps) s.r_nat = 1.0;
  EXPECT_NEAR(mean_naturalness({a, b}), (4 * 0.5 + 2 * 1.0) / 6.0, 1e-15);
}

TEST(Effectiveness, Examples) {
  // naturalness 0.81 and normalized adversariality 0.46 quoted for the proposed method
  EXPECT_NEAR(effectiveness(0.81, 0.46, 0.5, 0.5), 0.635, 1e-12);
  EXPECT_EQ(effectiveness(0.3, 0.9, 1.0, 0.0), 0.3);
  EXPECT_EQ(effectiveness(0.0, 0.0, 0.7, 0.2), 0.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int i = 0; i < 100; ++i) {
    const double a = u(rng), b = u(rng), n1 = u(rng), n2 = u(rng), a1 = u(rng), a2 = u(rng), wn = u(rng),
                 wa = u(rng);
    EXPECT_NEAR(effectiveness(a * n1 + b * n2, a * a1 + b * a2, wn, wa),
                a * effectiveness(n1, a1, wn, wa) + b * effectiveness(n2, a2, wn, wa), 1e-12);
  }
}

TEST(Pca, LineIsRecoveredByOneComponent) {
  Eigen::VectorXd dir(5), origin(5);
  dir << 1, -2, 0.5, 3, 1;
  origin << 4, 0, -1, 2, 7;
  Eigen::MatrixXd X(30, 5);
  for (int i = 0; i < 30; ++i) X.row(i) = (origin + (i * 0.37 - 3.0) * dir).transpose();
  const auto p = pca_reduce(X, 1);
  EXPECT_LT(reconstruction_error(X, p), 1e-10);
  EXPECT_NEAR(p.explained_variance_ratio[0], 1.0, 1e-12);
  EXPECT_NEAR(std::abs(p.basis.col(0).dot(dir.normalized())), 1.0, 1e-12);
  EXPECT_GT(p.basis(0, 0), 0.0);
}

TEST(Pca, IsotropicNoiseSpreadsVarianceEvenly) {
  const auto X = gaussian(20000, 5, 11);
  const auto p = pca_reduce(X, 5);
  for (int j = 0; j < 5; ++j) EXPECT_NEAR(p.explained_variance_ratio[j], 0.2, 0.02) << j;
  for (int j = 1; j < 5; ++j) EXPECT_GE(p.eigenvalues[j - 1], p.eigenvalues[j]);
}

TEST(Pca, FullRankIsLossless) {
  const Eigen::MatrixXd X = gaussian(50, 5, 2) * 3.0;
  const auto p = pca_reduce(X, 5);
  EXPECT_LT(reconstruction_error(X, p), 1e-10);
  EXPECT_NEAR(p.explained_variance_ratio.sum(), 1.0, 1e-12);
  EXPECT_LT((p.basis.transpose() * p.basis - Eigen::MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, InvariantToRowOrder) {
  const auto X = gaussian(40, 5, 5);
  const auto p = pca_reduce(X, 2);
  std::vector<int> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd Y(40, 5);
    for (int i = 0; i < 40; ++i) Y.row(i) = X.row(perm[i]);
    const auto q = pca_reduce(Y, 2);
    for (int i = 0; i < 40; ++i) EXPECT_LT((q.scores.row(i) - p.scores.row(perm[i])).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Pca, Errors) {
  EXPECT_THROW(pca_reduce(gaussian(1, 5, 1), 2), DomainError);
  EXPECT_THROW(pca_reduce(gaussian(10, 5, 1), 0), DomainError);
  EXPECT_THROW(pca_reduce(gaussian(10, 5, 1), 6), DomainError);
}

TEST(KMeans, RecoversSeparatedBlobs) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto [X, truth] = fixture::planar_blobs(6, 25, seed);
    const auto km = kmeans_cluster(X, 6, seed);
    EXPECT_TRUE(fixture::same_partition(km.assignments, truth)) << seed;
  }
}

TEST(KMeans, OneClusterIsTheMean) {
  const auto X = gaussian(30, 3, 4);
  const auto km = kmeans_cluster(X, 1, 1);
  EXPECT_LT((km.centroids.row(0) - X.colwise().mean()).cwiseAbs().maxCoeff(), 1e-12);
  for (int a : km.assignments) EXPECT_EQ(a, 0);
}

TEST(KMeans, OneClusterPerPointHasZeroInertia) {
  const auto X = gaussian(12, 2, 6);
  const auto km = kmeans_cluster(X, 12, 3);
  EXPECT_NEAR(km.inertia.back(), 0.0, 1e-20);
  auto sorted = km.assignments;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
}

TEST(KMeans, InertiaNeverIncreases) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto X = gaussian(200, 2, seed);
    const auto km = kmeans_cluster(X, 7, seed);
    ASSERT_FALSE(km.inertia.empty());
    for (std::size_t i = 1; i < km.inertia.size(); ++i) EXPECT_LE(km.inertia[i], km.inertia[i - 1] + 1e-9);
    EXPECT_LE(km.iterations, 300);
  }
}

TEST(KMeans, DeterministicAndValidated) {
  const auto X = gaussian(50, 2, 9);
  EXPECT_EQ(kmeans_cluster(X, 4, 5).assignments, kmeans_cluster(X, 4, 5).assignments);
  EXPECT_THROW(kmeans_cluster(gaussian(3, 2, 1), 4, 1), DomainError);
  EXPECT_THROW(kmeans_cluster(X, 0, 1), DomainError);
}

TEST(Taxonomy, CanonicalGeometries) {
  for (const auto& g : fixture::canonical_geometries()) {
    const auto l = label_collision_type(fixture::contact(g.first, g.second));
    EXPECT_EQ(l.label, g.label);
    EXPECT_EQ(l.name, collision_label_name(g.label));
    EXPECT_EQ(l.counter_intuitive, g.label >= 7);
  }
}

TEST(Taxonomy, SwappingVehiclesKeepsLabel) {
  for (const auto& g : fixture::canonical_geometries()) {
    EXPECT_EQ(label_collision_type(fixture::contact(g.second, g.first)).label, g.label);
  }
  // random contacts too
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> pos(-5, 5), head(-3.14, 3.14), spd(0, 30);
  int checked = 0;
  for (int trial = 0; trial < 5000; ++trial) {
    const auto a = fixture::car(1, 0, 0, head(rng), spd(rng));
    const auto b = fixture::car(2, pos(rng), pos(rng), head(rng), spd(rng));
    const auto e1 = detect_collision(a, b), e2 = detect_collision(b, a);
    ASSERT_EQ(e1.has_value(), e2.has_value());
    if (!e1) continue;
    ++checked;
    EXPECT_EQ(label_collision_type(*e1).label, label_collision_type(*e2).label);
    EXPECT_NEAR(closing_speed(*e1), closing_speed(*e2), 1e-9);
  }
  EXPECT_GT(checked, 500);
}

TEST(Taxonomy, ClosingSpeedThresholds) {
  // the same nose-to-tail contact at increasing closing speeds
  const auto label_at = [](double closing) {
    return label_collision_type(fixture::contact(fixture::car(1, 0, 0, 0, 10 + closing), fixture::car(2, 4.8, 0, 0, 10)))
        .label;
  };
  EXPECT_EQ(label_at(3.0), 5);
  EXPECT_EQ(label_at(3.5), 0);
  EXPECT_EQ(label_at(15.0), 0);
  EXPECT_EQ(label_at(15.5), 7);
  EXPECT_THROW(collision_label_name(10), DomainError);
}

TEST(ClusterReport, EmptyWithoutAgentCollisions) {
  const auto rep = cluster_label_report({run_with(3), run_with(3, {hit(kAv, kBg)})});
  EXPECT_TRUE(rep.empty());
  EXPECT_EQ(cluster_report_json(rep)["events"], 0);
}

TEST(ClusterReport, AllRearEnds) {
  std::vector<ScenarioRecord> rs;
  for (int k = 0; k < 12; ++k) {
    rs.push_back(run_with(2, {fixture::contact(fixture::car(kAgent, 0, 0, 0, 15 + 0.5 * k),
                                               fixture::car(kAv, 4.8, 0.1 * (k % 3), 0, 10))}));
  }
  const auto rep = cluster_label_report(rs);
  ASSERT_EQ(rep.events.size(), 12u);
  EXPECT_EQ(rep.label_ratios[0], 1.0);
  EXPECT_EQ(rep.counter_intuitive_share, 0.0);
  EXPECT_EQ(rep.clusters, 10);
}

TEST(ClusterReport, MixedCanonicalFixture) {
  std::vector<ScenarioRecord> rs;
  for (const auto& g : fixture::canonical_geometries()) {
    auto a = g.first, b = g.second;
    a.id = kAgent;
    b.id = kBg;
    rs.push_back(run_with(2, {fixture::contact(a, b)}));
    rs.push_back(run_with(2, {fixture::contact(b, a)}));
  }
  const auto rep = cluster_label_report(rs, 10, 4);
  ASSERT_EQ(rep.events.size(), 20u);
  for (std::size_t l = 0; l < 10; ++l) EXPECT_NEAR(rep.label_ratios[l], 0.1, 1e-12) << l;
  EXPECT_NEAR(rep.counter_intuitive_share, rep.label_ratios[7] + rep.label_ratios[8] + rep.label_ratios[9], 1e-15);
  EXPECT_NEAR(rep.counter_intuitive_share, 0.3, 1e-12);
  int total = 0;
  for (const auto& row : rep.cross_table) total += std::accumulate(row.begin(), row.end(), 0);
  EXPECT_EQ(total, 20);
  EXPECT_EQ(rep.pca.scores.cols(), 2);
}

TEST(Pipeline, BlobSetsThroughPcaAndKMeans) {
  for (std::uint64_t seed : {21, 22, 23}) {
    const auto [X, truth] = fixture::planar_blobs(10, 30, seed);
    const auto p = pca_reduce(X, 2);
    const auto km = kmeans_cluster(p.scores, 10, seed);
    EXPECT_TRUE(fixture::same_partition(km.assignments, truth)) << seed;
  }
}
