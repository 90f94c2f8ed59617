#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "natadv/idm.hpp"
#include "natadv/mobil.hpp"
#include "natadv/preprocess.hpp"

namespace natadv {

// sqrt( mean((d_data - d_sim)^2 / |d_data|) / mean(|d_data|) ).
// Throws ShapeError on length mismatch or empty input.
double objective_mixed_error(std::span<const double> sim_gaps, std::span<const double> data_gaps);

// One car-following segment in 1-D along-track form.
struct CalibrationSegment {
  LeaderTrajectory leader;
  double follower_front = 0.0;
  double follower_speed = 0.0;
  std::vector<double> data_gaps;
  double dt = kFrameDt;
};

// Projects a corrected segment onto its direction of travel. Requires leader
// records on every frame.
CalibrationSegment calibration_segment(const CarFollowingSegment& seg);

struct IdmRanges {
  double a_lo = 0.1, a_hi = 6.0;
  double v_lo = 1.0, v_hi = 70.0;
  double s_lo = 0.1, s_hi = 8.0;
  double b_lo = 0.1, b_hi = 6.0;
  double t_lo = 0.1, t_hi = 5.0;
};

struct GaConfig {
  int population = 64;
  int generations = 100;
  double crossover_rate = 0.9;
  double mutation_rate = 0.2;  // per gene
  int tournament_k = 3;
  double blend_alpha = 0.5;
  double mutation_sigma_frac = 0.05;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const GaConfig& g);
GaConfig ga_from_json(const nlohmann::json& j, GaConfig base = {});

// Mean mixed error of IDM `p` over the corpus.
double corpus_objective(const IdmParameters& p, const std::vector<CalibrationSegment>& corpus);

struct IdmCalibration {
  IdmParameters params;
  std::vector<double> best_per_generation;  // one entry per generation, non-increasing
  std::size_t corpus_size = 0;
};

IdmCalibration calibrate_idm(const std::vector<CalibrationSegment>& corpus, const IdmRanges& ranges,
                             const GaConfig& ga);

// Linear-interpolation percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

MobilParameters calibrate_mobil(const std::vector<LaneChangeEvent>& events, double politeness_p = 0.5);

nlohmann::json calibration_report(const IdmCalibration& c);

}  // namespace natadv
