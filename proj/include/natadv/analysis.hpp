#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "natadv/adversarial.hpp"
#include "natadv/sim.hpp"

namespace natadv {

struct MacroMetrics {
  std::size_t runs = 0;
  double collision_rate_av = 0.0;     // runs ending in an agent-AV collision
  double collision_rate_other = 0.0;  // runs ending in an agent-background collision
  std::size_t lane_change_count = 0;  // agent lane-id transitions, all runs
};

// Throws DomainError on an empty record set.
MacroMetrics macro_metrics(const std::vector<ScenarioRecord>& records);

// Agent lane-id transitions over the snapshots; off-lane steps are skipped.
std::size_t lane_changes(const ScenarioRecord& record);

struct Histogram {
  double bin_width = 0.0;
  double origin = 0.0;  // left edge of bin 0 (multiple of bin_width)
  std::vector<std::size_t> counts;
  std::size_t total = 0;

  double density(std::size_t bin) const;
};

// Bins of fixed width aligned to multiples of the width. Throws DomainError
// for a non-positive width.
Histogram make_histogram(const std::vector<double>& values, double bin_width);

inline constexpr double kAccelBinWidth = 0.25;
inline constexpr double kSteeringBinWidth = 0.05;

struct ActionStats {
  std::size_t samples = 0;
  std::pair<double, double> accel_range{0.0, 0.0};
  std::pair<double, double> steering_range{0.0, 0.0};
  Histogram accel_hist;
  Histogram steering_hist;
};

enum class Role { kAgent, kAv, kBackground };
std::string to_string(Role r);

// Exact ranges and histograms of the executed controls per role.
std::map<Role, ActionStats> micro_metrics(const std::vector<ScenarioRecord>& records);

double mean_naturalness(const std::vector<ScenarioRecord>& records);

// w_N N + w_A A.
double effectiveness(double N, double A, double w_N, double w_A);

struct PcaResult {
  Eigen::VectorXd mean;
  Eigen::MatrixXd basis;   // d x k, columns by decreasing variance
  Eigen::MatrixXd scores;  // n x k
  Eigen::VectorXd eigenvalues;               // all d, decreasing
  Eigen::VectorXd explained_variance_ratio;  // first k
};

// Rows are samples. Each basis vector has its first nonzero component
// positive. Throws DomainError when n < k or k > d or k < 1.
PcaResult pca_reduce(const Eigen::MatrixXd& X, int k);

struct KMeansResult {
  std::vector<int> assignments;
  Eigen::MatrixXd centroids;          // K x dim
  std::vector<double> inertia;        // after each Lloyd iteration
  int iterations = 0;
};

// k-means++ seeding, Lloyd iterations to an assignment fixpoint or 300
// iterations; an empty cluster is re-seeded at the point farthest from its
// centroid. Throws DomainError when n < K or K < 1.
KMeansResult kmeans_cluster(const Eigen::MatrixXd& X, int K, std::uint64_t seed, int max_iter = 300);

using CollisionFeature = Eigen::Matrix<double, 5, 1>;
// (relative lateral, longitudinal position, lateral, longitudinal velocity,
// relative heading) of the second vehicle in the first's frame.
CollisionFeature collision_feature(const CollisionEvent& ev);

struct CollisionLabel {
  int label = 0;
  std::string name;
  bool counter_intuitive = false;
};

inline constexpr double kHighSpeedClosing = 15.0;  // m/s
inline constexpr double kLowSpeedClosing = 3.0;    // m/s

// Geometric taxonomy over the contact sides, the relative heading bucket and
// the closing speed:
//   0 rear-end, 1 side-swipe left, 2 side-swipe right, 3 cut-in from the left,
//   4 cut-in from the right, 5 braking-induced front impact (nose to tail,
//   closing <= 3 m/s), 6 other side contact, 7 high-speed rear impact
//   (closing > 15 m/s), 8 T-shaped, 9 rear-to-rear.
// Left/right are seen from the rear vehicle of the pair, so the label does not
// depend on the order of the two vehicles in the event.
CollisionLabel label_collision_type(const CollisionEvent& ev);
std::string collision_label_name(int label);

// Closing speed (rate at which the centers approach), order independent.
double closing_speed(const CollisionEvent& ev);

struct ClusterReport {
  std::vector<CollisionEvent> events;
  std::vector<CollisionLabel> labels;
  std::array<double, 10> label_ratios{};
  double counter_intuitive_share = 0.0;
  int clusters = 0;
  std::vector<int> assignments;
  std::vector<std::array<int, 10>> cross_table;  // cluster x label counts
  PcaResult pca;

  bool empty() const { return events.empty(); }
};

// Agent collisions of every run: PCA(k=2) on the collision features, K-means
// with min(K, n) clusters and geometric labels.
ClusterReport cluster_label_report(const std::vector<ScenarioRecord>& records, int K = 10, std::uint64_t seed = 1);

nlohmann::json metrics_json(const MacroMetrics& macro, const std::map<Role, ActionStats>& micro, double naturalness);
nlohmann::json cluster_report_json(const ClusterReport& r);
std::string metrics_text(const MacroMetrics& macro, const std::map<Role, ActionStats>& micro, double naturalness);
std::string histogram_csv(const Histogram& h);

}  // namespace natadv
