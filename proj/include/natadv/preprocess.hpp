#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "natadv/road.hpp"
#include "natadv/trajectory.hpp"

namespace natadv {

// Frame-level lookup over a corpus of episodes.
class EpisodeIndex {
 public:
  explicit EpisodeIndex(const std::vector<Episode>& episodes);
  const TrajectoryRecord* find(VehicleId id, std::int64_t frame) const;
  // Vehicle whose preceding_id is `leader` at `frame`, if any (lowest id wins).
  const TrajectoryRecord* follower_of(VehicleId leader, std::int64_t frame) const;

 private:
  std::map<std::pair<std::int64_t, VehicleId>, const TrajectoryRecord*> by_frame_;
};

// A contiguous stretch with one fixed leader. `leader` is aligned with `ego`
// and holds the leader's record for the same frame when it is known.
struct CarFollowingSegment {
  VehicleId vehicle_id = 0;
  VehicleId leader_id = 0;
  DataSource source = DataSource::kSynthetic;
  std::vector<TrajectoryRecord> ego;
  std::vector<std::optional<TrajectoryRecord>> leader;
  bool negative_gap = false;

  double duration_s() const { return static_cast<double>(ego.size()) * kFrameDt; }
};

// Calibration unit: per-sample follower speed, speed difference to the leader
// (follower minus leader), bumper gap and leader data.
struct CarFollowingSample {
  double t = 0.0;
  double v = 0.0;
  double dv = 0.0;
  double gap = 0.0;
  double leader_speed = 0.0;
  double leader_length = kDefaultVehicleLength;
};

std::vector<CarFollowingSample> to_samples(const CarFollowingSegment& seg);

struct ScreeningRules {
  double min_duration_s = 30.0;
  double min_travel_m = 20.0;
  double trim_s = 5.0;
  double max_abs_accel = 8.0;
  int small_car_class = 2;
  double min_gap_m = 0.1;
  bool exclude_far_right_lane = true;
  bool keep_lane_changes = false;

  static ScreeningRules ngsim();
  static ScreeningRules interaction();
  void validate() const;
};

enum class RejectReason {
  kLaneChange,
  kDuration,
  kTravel,
  kTrimmedTooShort,
  kFarRightLane,
  kAcceleration,
  kVehicleClass,
  kGap,
};
std::string to_string(RejectReason r);

struct ScreenVerdict {
  bool keep = false;
  std::optional<RejectReason> reason;
  CarFollowingSegment trimmed;  // segment after head/tail trimming
};

// Segments split wherever preceding_id changes or disappears. When `index` is
// given, leader records are attached.
std::vector<CarFollowingSegment> extract_car_following(const Episode& episode,
                                                       const EpisodeIndex* index = nullptr);

// Applies the screening rules in order; the first failing rule is the reason.
// `road` identifies the far-right lane / ramps (rule skipped without it).
ScreenVerdict screen(const CarFollowingSegment& segment, const ScreeningRules& rules,
                     const RoadNetwork* road = nullptr);

// Symmetric exponential moving average with smoothing width `width_s`
// (kernel exp(-|k dt| / width), window |k dt| <= 3 width, renormalized at the ends).
std::vector<double> sema_filter(std::span<const double> series, double dt, double width_s);

// Smooths ego and leader positions with the sEMA filter.
CarFollowingSegment smooth_segment(const CarFollowingSegment& seg, double width_s = 0.5);

// Speed from central differences of positions, acceleration from central
// differences of speed; one-sided at the ends. Throws DomainError for fewer
// than three samples.
CarFollowingSegment correct_kinematics(const CarFollowingSegment& seg);

// Bumper gap = center distance - (leader length + ego length) / 2. A missing
// leader length defaults to 5 m; overlapping vehicles set negative_gap.
CarFollowingSegment correct_gap(const CarFollowingSegment& seg);

struct LaneChangeEvent {
  VehicleId vehicle_id = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  int from_lane = 0;
  int to_lane = 0;
  double peak_heading = 0.0;  // relative to the lane direction
  // Accelerations just before / after the maneuver.
  double a_c = 0.0, a_c_new = 0.0;
  double a_n = 0.0, a_n_new = 0.0;
  double a_o = 0.0, a_o_new = 0.0;
};

inline constexpr double kLaneChangeHeadingThreshold = 0.02;  // rad

// One event per lane_id transition; the window is the contiguous run of
// frames around the transition whose |heading| relative to the lane exceeds
// the threshold, peaking at the greatest heading.
std::vector<LaneChangeEvent> extract_lane_change_events(const Episode& episode,
                                                        const EpisodeIndex* index = nullptr,
                                                        const RoadNetwork* road = nullptr);

struct PreprocessOutcome {
  std::string segment_id;
  ScreenVerdict verdict;
};

// Full chain: extraction, screening, smoothing and correction of kept segments.
struct PreprocessResult {
  std::vector<PreprocessOutcome> outcomes;
  std::vector<CarFollowingSegment> kept;  // corrected
  std::vector<LaneChangeEvent> lane_changes;
};

PreprocessResult preprocess_corpus(const std::vector<Episode>& episodes, const ScreeningRules& rules,
                                   const RoadNetwork* road, double sema_width_s = 0.5);

std::string screening_report_csv(const std::vector<PreprocessOutcome>& outcomes);

}  // namespace natadv
