#include "natadv/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "natadv/error.hpp"

namespace natadv {

using nlohmann::json;

std::size_t lane_changes(const ScenarioRecord& record) {
  std::optional<int> last;
  for (const auto& v : record.initial) {
    if (v.id == record.agent) last = v.lane;
  }
  std::size_t n = 0;
  for (const auto& s : record.steps) {
    for (const auto& v : s.snapshot.vehicles) {
      if (v.id != record.agent || !v.lane) continue;
      if (last && *last != *v.lane) ++n;
      last = v.lane;
    }
  }
  return n;
}

MacroMetrics macro_metrics(const std::vector<ScenarioRecord>& records) {
  if (records.empty()) throw DomainError("no scenario records to analyze");
  MacroMetrics m;
  m.runs = records.size();
  std::size_t av = 0, other = 0;
  for (const auto& r : records) {
    if (!r.steps.empty()) {
      const int rc = collision_reward(r.steps.back().events, r.agent, r.av);
      if (rc == 1) ++av;
      if (rc == -1) ++other;
    }
    m.lane_change_count += lane_changes(r);
  }
  m.collision_rate_av = static_cast<double>(av) / static_cast<double>(m.runs);
  m.collision_rate_other = static_cast<double>(other) / static_cast<double>(m.runs);
  return m;
}

double Histogram::density(std::size_t bin) const {
  if (total == 0 || bin >= counts.size()) return 0.0;
  return static_cast<double>(counts[bin]) / (static_cast<double>(total) * bin_width);
}

Histogram make_histogram(const std::vector<double>& values, double bin_width) {
  if (!(bin_width > 0.0)) throw DomainError("histogram bin width must be > 0");
  Histogram h;
  h.bin_width = bin_width;
  if (values.empty()) return h;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double first = std::floor(*lo / bin_width);
  h.origin = first * bin_width;
  const auto bins = static_cast<std::size_t>(std::floor(*hi / bin_width) - first) + 1;
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor(v / bin_width) - first);
    ++h.counts[std::min(b, bins - 1)];
  }
  h.total = values.size();
  return h;
}

std::string to_string(Role r) {
  switch (r) {
    case Role::kAgent: return "agent";
    case Role::kAv: return "av";
    case Role::kBackground: return "background";
  }
  return "?";
}

std::map<Role, ActionStats> micro_metrics(const std::vector<ScenarioRecord>& records) {
  std::map<Role, std::vector<double>> acc, steer;
  for (const auto& r : records) {
    for (const auto& s : r.steps) {
      for (const auto& [id, c] : s.snapshot.controls) {
        const Role role = id == r.agent ? Role::kAgent : id == r.av ? Role::kAv : Role::kBackground;
        acc[role].push_back(c.acceleration);
        steer[role].push_back(c.steering);
      }
    }
  }
  std::map<Role, ActionStats> out;
  for (const auto& [role, a] : acc) {
    const auto& s = steer[role];
    ActionStats st;
    st.samples = a.size();
    const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
    const auto [smin, smax] = std::minmax_element(s.begin(), s.end());
    st.accel_range = {*amin, *amax};
    st.steering_range = {*smin, *smax};
    st.accel_hist = make_histogram(a, kAccelBinWidth);
    st.steering_hist = make_histogram(s, kSteeringBinWidth);
    out[role] = std::move(st);
  }
  return out;
}

double mean_naturalness(const std::vector<ScenarioRecord>& records) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : records) {
    for (const auto& s : r.steps) {
      sum += s.r_nat;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

double effectiveness(double N, double A, double w_N, double w_A) { return w_N * N + w_A * A; }

PcaResult pca_reduce(const Eigen::MatrixXd& X, int k) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (k < 1 || k > d) throw DomainError("PCA needs 1 <= k <= feature dimension");
  if (n < k) throw DomainError("PCA needs at least k samples");
  PcaResult r;
  r.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd C = X.rowwise() - r.mean.transpose();
  const Eigen::MatrixXd cov = (C.transpose() * C) / static_cast<double>(std::max<Eigen::Index>(1, n - 1));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw DomainError("covariance eigen-decomposition failed");
  // Eigen returns ascending order.
  r.eigenvalues = es.eigenvalues().reverse();
  const Eigen::MatrixXd vecs = es.eigenvectors().rowwise().reverse();
  r.basis = vecs.leftCols(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (std::abs(r.basis(i, j)) > 1e-12) {
        if (r.basis(i, j) < 0) r.basis.col(j) *= -1.0;
        break;
      }
    }
  }
  r.scores = C * r.basis;
  const double total = r.eigenvalues.cwiseMax(0.0).sum();
  r.explained_variance_ratio = Eigen::VectorXd::Zero(k);
  if (total > 0.0) {
    for (Eigen::Index j = 0; j < k; ++j) r.explained_variance_ratio[j] = std::max(0.0, r.eigenvalues[j]) / total;
  }
  return r;
}

KMeansResult kmeans_cluster(const Eigen::MatrixXd& X, int K, std::uint64_t seed, int max_iter) {
  const Eigen::Index n = X.rows();
  if (K < 1) throw DomainError("K must be >= 1");
  if (n < K) throw DomainError("k-means needs at least K samples");
  std::mt19937_64 rng(seed);
  KMeansResult r;
  r.centroids.resize(K, X.cols());

  // k-means++
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  r.centroids.row(0) = X.row(std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng));
  for (int c = 1; c < K; ++c) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& v = d2[static_cast<std::size_t>(i)];
      v = std::min(v, (X.row(i) - r.centroids.row(c - 1)).squaredNorm());
      sum += v;
    }
    Eigen::Index pick = 0;
    if (sum > 0.0) {
      double u = std::uniform_real_distribution<double>(0.0, sum)(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[static_cast<std::size_t>(pick)];
        if (u < 0.0) break;
      }
    } else {
      pick = std::uniform_int_distribution<Eigen::Index>(0, n - 1)(rng);
    }
    r.centroids.row(c) = X.row(pick);
  }

  r.assignments.assign(static_cast<std::size_t>(n), -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < K; ++c) {
        const double dd = (X.row(i) - r.centroids.row(c)).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      if (r.assignments[static_cast<std::size_t>(i)] != best) changed = true;
      r.assignments[static_cast<std::size_t>(i)] = best;
      inertia += bd;
    }
    r.iterations = it + 1;
    if (!changed && it > 0) {
      r.inertia.push_back(inertia);
      break;
    }
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(K, X.cols());
    std::vector<int> counts(static_cast<std::size_t>(K), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int c = r.assignments[static_cast<std::size_t>(i)];
      sums.row(c) += X.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < K; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        r.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
        continue;
      }
      // Empty cluster: move it to the point farthest from its own centroid.
      Eigen::Index far = 0;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dd = (X.row(i) - r.centroids.row(r.assignments[static_cast<std::size_t>(i)])).squaredNorm();
        if (dd > fd) {
          fd = dd;
          far = i;
        }
      }
      r.centroids.row(c) = X.row(far);
    }
    double after = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < K; ++c) bd = std::min(bd, (X.row(i) - r.centroids.row(c)).squaredNorm());
      after += bd;
    }
    r.inertia.push_back(after);
  }
  return r;
}

CollisionFeature collision_feature(const CollisionEvent& ev) {
  CollisionFeature f;
  f << ev.relative_position.lateral, ev.relative_position.longitudinal, ev.relative_velocity.lateral,
      ev.relative_velocity.longitudinal, ev.relative_heading;
  return f;
}

double closing_speed(const CollisionEvent& ev) {
  const Vec2 p{ev.relative_position.longitudinal, ev.relative_position.lateral};
  const Vec2 v{ev.relative_velocity.longitudinal, ev.relative_velocity.lateral};
  const double d = p.norm();
  if (d < 1e-12) return v.norm();
  return -(p.x * v.x + p.y * v.y) / d;
}

std::string collision_label_name(int label) {
  static const std::array<const char*, 10> names{
      "rear-end",          "side-swipe-left",          "side-swipe-right", "cut-in-from-left",
      "cut-in-from-right", "braking-front-impact",     "side-contact",     "high-speed-rear-impact",
      "t-shaped",          "rear-to-rear"};
  if (label < 0 || label > 9) throw DomainError("collision label out of range");
  return names[static_cast<std::size_t>(label)];
}

namespace {

bool lateral(Side s) { return s == Side::kLeft || s == Side::kRight; }

int classify(const CollisionEvent& ev) {
  const double th = std::abs(wrap_angle(ev.relative_heading));
  const Side a = ev.contact_sides.first, b = ev.contact_sides.second;
  const auto pair_is = [&](Side x, Side y) { return (a == x && b == y) || (a == y && b == x); };

  if (a == Side::kRear && b == Side::kRear) return 9;
  if (th >= 3 * std::numbers::pi / 4) return 6;
  if (th >= std::numbers::pi / 4) {
    if ((a == Side::kFront && lateral(b)) || (b == Side::kFront && lateral(a))) return 8;
    return 6;
  }
  // Aligned headings.
  if (pair_is(Side::kFront, Side::kRear)) {
    const double closing = closing_speed(ev);
    if (closing > kHighSpeedClosing) return 7;
    if (closing <= kLowSpeedClosing) return 5;
    return 0;
  }
  // Reference = rear vehicle of the pair (the other one lies ahead of it).
  // Ahead/behind is measured along the mean heading so both orders agree.
  const double half = wrap_angle(ev.relative_heading) / 2.0;
  const double ahead = ev.relative_position.longitudinal * std::cos(half) + ev.relative_position.lateral * std::sin(half);
  bool first_is_ref = ahead > 0.0;
  if (ahead == 0.0) first_is_ref = ev.ids.first < ev.ids.second;
  const Side ref = first_is_ref ? a : b;
  const Side other = first_is_ref ? b : a;
  if (ref == Side::kLeft) return 1;
  if (ref == Side::kRight) return 2;
  if (ref == Side::kFront && other == Side::kRight) return 3;
  if (ref == Side::kFront && other == Side::kLeft) return 4;
  if (lateral(other)) return other == Side::kLeft ? 2 : 1;
  return 6;
}

}  // namespace

CollisionLabel label_collision_type(const CollisionEvent& ev) {
  CollisionLabel l;
  l.label = classify(ev);
  l.name = collision_label_name(l.label);
  l.counter_intuitive = l.label >= 7;
  return l;
}

ClusterReport cluster_label_report(const std::vector<ScenarioRecord>& records, int K, std::uint64_t seed) {
  ClusterReport rep;
  for (const auto& r : records) {
    for (const auto& s : r.steps) {
      for (const auto& ev : s.events) {
        if (ev.involves(r.agent)) rep.events.push_back(ev);
      }
    }
  }
  if (rep.events.empty()) return rep;
  const auto n = static_cast<Eigen::Index>(rep.events.size());
  Eigen::MatrixXd F(n, 5);
  std::array<int, 10> counts{};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& ev = rep.events[static_cast<std::size_t>(i)];
    F.row(i) = collision_feature(ev).transpose();
    rep.labels.push_back(label_collision_type(ev));
    ++counts[static_cast<std::size_t>(rep.labels.back().label)];
  }
  for (std::size_t l = 0; l < 10; ++l) rep.label_ratios[l] = static_cast<double>(counts[l]) / static_cast<double>(n);
  rep.counter_intuitive_share = rep.label_ratios[7] + rep.label_ratios[8] + rep.label_ratios[9];
  rep.pca = pca_reduce(F, static_cast<int>(std::min<Eigen::Index>(2, n)));
  rep.clusters = static_cast<int>(std::min<Eigen::Index>(K, n));
  const KMeansResult km = kmeans_cluster(rep.pca.scores, rep.clusters, seed);
  rep.assignments = km.assignments;
  rep.cross_table.assign(static_cast<std::size_t>(rep.clusters), std::array<int, 10>{});
  for (std::size_t i = 0; i < rep.labels.size(); ++i) {
    ++rep.cross_table[static_cast<std::size_t>(rep.assignments[i])][static_cast<std::size_t>(rep.labels[i].label)];
  }
  return rep;
}

namespace {

json hist_json(const Histogram& h) {
  json d = json::array();
  for (std::size_t i = 0; i < h.counts.size(); ++i) d.push_back(h.density(i));
  return {{"bin_width", h.bin_width}, {"origin", h.origin}, {"counts", h.counts}, {"density", d}};
}

}  // namespace

json metrics_json(const MacroMetrics& macro, const std::map<Role, ActionStats>& micro, double naturalness) {
  json roles = json::object();
  for (const auto& [role, s] : micro) {
    roles[to_string(role)] = {{"samples", s.samples},
                              {"accel_range", {s.accel_range.first, s.accel_range.second}},
                              {"steering_range", {s.steering_range.first, s.steering_range.second}},
                              {"accel_histogram", hist_json(s.accel_hist)},
                              {"steering_histogram", hist_json(s.steering_hist)}};
  }
  return {{"runs", macro.runs},
          {"collision_rate_av", macro.collision_rate_av},
          {"collision_rate_other", macro.collision_rate_other},
          {"lane_change_count", macro.lane_change_count},
          {"mean_naturalness", naturalness},
          {"roles", roles}};
}

json cluster_report_json(const ClusterReport& r) {
  json labels = json::array();
  for (std::size_t l = 0; l < 10; ++l) {
    labels.push_back({{"label", l},
                      {"name", collision_label_name(static_cast<int>(l))},
                      {"counter_intuitive", l >= 7},
                      {"ratio", r.label_ratios[l]}});
  }
  json out = {{"events", r.events.size()},
              {"labels", labels},
              {"counter_intuitive_share", r.counter_intuitive_share},
              {"clusters", r.clusters},
              {"cross_table", r.cross_table}};
  if (!r.empty()) {
    out["explained_variance_ratio"] =
        std::vector<double>(r.pca.explained_variance_ratio.data(),
                            r.pca.explained_variance_ratio.data() + r.pca.explained_variance_ratio.size());
  }
  return out;
}

std::string metrics_text(const MacroMetrics& macro, const std::map<Role, ActionStats>& micro, double naturalness) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "runs                    %zu\n", macro.runs);
  os << buf;
  std::snprintf(buf, sizeof buf, "collision rate (AV)     %.2f %%\n", 100.0 * macro.collision_rate_av);
  os << buf;
  std::snprintf(buf, sizeof buf, "collision rate (other)  %.2f %%\n", 100.0 * macro.collision_rate_other);
  os << buf;
  std::snprintf(buf, sizeof buf, "lane changes            %zu\n", macro.lane_change_count);
  os << buf;
  std::snprintf(buf, sizeof buf, "mean naturalness        %.4f\n\n", naturalness);
  os << buf;
  os << "role        accel range [m/s^2]      steering range [rad]\n";
  for (const auto& [role, s] : micro) {
    std::snprintf(buf, sizeof buf, "%-10s  [%7.2f, %7.2f]        [%6.2f, %6.2f]\n", to_string(role).c_str(),
                  s.accel_range.first, s.accel_range.second, s.steering_range.first, s.steering_range.second);
    os << buf;
  }
  return os.str();
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os << "bin_left,bin_right,count,density\n";
  char buf[160];
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    const double l = h.origin + static_cast<double>(i) * h.bin_width;
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%zu,%.10g\n", l, l + h.bin_width, h.counts[i], h.density(i));
    os << buf;
  }
  return os.str();
}

}  // namespace natadv
