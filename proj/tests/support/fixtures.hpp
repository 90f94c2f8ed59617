#pragma once

// Hand-built collision geometries and clustered point sets.

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "natadv/sim.hpp"

namespace fixture {

inline natadv::VehicleState car(natadv::VehicleId id, double x, double y, double heading, double speed) {
  natadv::VehicleState v;
  v.id = id;
  v.position = {x, y};
  v.heading = heading;
  v.speed = speed;
  return v;
}

struct Geometry {
  int label;
  natadv::VehicleState first;
  natadv::VehicleState second;
};

// One contact per taxonomy label, described from the first vehicle.
inline std::vector<Geometry> canonical_geometries() {
  constexpr double pi = std::numbers::pi;
  return {
      {0, car(1, 0, 0, 0, 15), car(2, 4.8, 0, 0, 10)},           // nose into tail at 5 m/s
      {1, car(1, 0, 0, 0, 12), car(2, 1.0, 1.9, 0, 10)},         // rear car grazed on its left
      {2, car(1, 0, 0, 0, 12), car(2, 1.0, -1.9, 0, 10)},        // rear car grazed on its right
      {3, car(1, 0, 0, 0, 12), car(2, 3.5, 1.0, -0.5, 10)},      // leader cuts in from the left
      {4, car(1, 0, 0, 0, 12), car(2, 3.5, -1.0, 0.5, 10)},      // leader cuts in from the right
      {5, car(1, 0, 0, 0, 10), car(2, 4.8, 0, 0, 8)},            // leader brakes, 2 m/s closing
      {6, car(1, 0, 0, 0, 10), car(2, 0.5, 1.9, pi, 10)},        // opposite directions, flank to flank
      {7, car(1, 0, 0, 0, 30), car(2, 4.8, 0, 0, 10)},           // 20 m/s into the tail
      {8, car(1, 0, 0, 0, 10), car(2, 0, -3.3, pi / 2, 10)},     // nose into the right flank
      {9, car(1, 0, 0, 0, 5), car(2, -4.8, 0, pi, 5)},           // tail to tail
  };
}

inline natadv::CollisionEvent contact(const natadv::VehicleState& a, const natadv::VehicleState& b) {
  auto ev = natadv::detect_collision(a, b);
  if (!ev) throw std::logic_error("fixture vehicles do not overlap");
  return *ev;
}

// `clusters` tight blobs in 5-D whose centers span a random plane, so two
// principal components separate them.
inline std::pair<Eigen::MatrixXd, std::vector<int>> planar_blobs(int clusters, int per_cluster, std::uint64_t seed,
                                                                 double spacing = 20.0, double noise = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd basis(5, 2);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = n01(rng);
  basis = Eigen::HouseholderQR<Eigen::MatrixXd>(basis).householderQ() * Eigen::MatrixXd::Identity(5, 2);
  Eigen::MatrixXd X(clusters * per_cluster, 5);
  std::vector<int> truth;
  const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(clusters))));
  for (int c = 0; c < clusters; ++c) {
    Eigen::Vector2d center((c % side) * spacing, (c / side) * spacing * 1.3);
    const Eigen::VectorXd mu = basis * center;
    for (int k = 0; k < per_cluster; ++k) {
      const int row = c * per_cluster + k;
      for (int j = 0; j < 5; ++j) X(row, j) = mu[j] + noise * n01(rng);
      truth.push_back(c);
    }
  }
  return {X, truth};
}

// True when two labelings induce the same partition.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j)
      if ((a[i] == a[j]) != (b[i] == b[j])) return false;
  return true;
}

}  // namespace fixture
