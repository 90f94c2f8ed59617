#include "natadv/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "natadv/error.hpp"

namespace natadv {

EpisodeIndex::EpisodeIndex(const std::vector<Episode>& episodes) {
  for (const auto& ep : episodes) {
    for (const auto& r : ep.records) by_frame_[{r.frame, r.vehicle_id}] = &r;
  }
}

const TrajectoryRecord* EpisodeIndex::find(VehicleId id, std::int64_t frame) const {
  const auto it = by_frame_.find({frame, id});
  return it == by_frame_.end() ? nullptr : it->second;
}

const TrajectoryRecord* EpisodeIndex::follower_of(VehicleId leader, std::int64_t frame) const {
  auto it = by_frame_.lower_bound({frame, std::numeric_limits<VehicleId>::min()});
  for (; it != by_frame_.end() && it->first.first == frame; ++it) {
    if (it->second->preceding_id == leader) return it->second;
  }
  return nullptr;
}

ScreeningRules ScreeningRules::ngsim() { return ScreeningRules{}; }

ScreeningRules ScreeningRules::interaction() {
  ScreeningRules r;
  r.min_duration_s = 4.0;
  r.exclude_far_right_lane = false;
  return r;
}

void ScreeningRules::validate() const {
  if (!(min_duration_s > 0 && min_travel_m > 0 && trim_s >= 0 && max_abs_accel > 0 && min_gap_m > 0)) {
    throw DomainError("screening thresholds must be positive");
  }
}

std::string to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kLaneChange: return "lane-change";
    case RejectReason::kDuration: return "duration";
    case RejectReason::kTravel: return "travel";
    case RejectReason::kTrimmedTooShort: return "trimmed-duration";
    case RejectReason::kFarRightLane: return "far-right-lane";
    case RejectReason::kAcceleration: return "accel";
    case RejectReason::kVehicleClass: return "vehicle-class";
    case RejectReason::kGap: return "gap";
  }
  return "?";
}

std::vector<CarFollowingSegment> extract_car_following(const Episode& episode, const EpisodeIndex* index) {
  std::vector<CarFollowingSegment> out;
  CarFollowingSegment* cur = nullptr;
  std::optional<std::int64_t> prev_frame;
  for (const auto& r : episode.records) {
    const bool contiguous = prev_frame && r.frame == *prev_frame + 1;
    prev_frame = r.frame;
    if (!r.preceding_id) {
      cur = nullptr;
      continue;
    }
    if (!cur || cur->leader_id != *r.preceding_id || !contiguous) {
      out.push_back(CarFollowingSegment{});
      cur = &out.back();
      cur->vehicle_id = episode.ego_id;
      cur->leader_id = *r.preceding_id;
      cur->source = episode.source;
    }
    cur->ego.push_back(r);
    if (index) {
      const auto* lead = index->find(*r.preceding_id, r.frame);
      cur->leader.push_back(lead ? std::optional<TrajectoryRecord>(*lead) : std::nullopt);
    } else {
      cur->leader.push_back(std::nullopt);
    }
  }
  return out;
}

namespace {

std::size_t frames_for(double seconds) {
  return static_cast<std::size_t>(std::ceil(seconds / kFrameDt - 1e-9));
}

double bumper_gap(const TrajectoryRecord& ego, const std::optional<TrajectoryRecord>& leader,
                  bool* known) {
  *known = true;
  if (leader) {
    const double lead_len = leader->length > 0.0 ? leader->length : kDefaultVehicleLength;
    return std::hypot(leader->x - ego.x, leader->y - ego.y) - 0.5 * (lead_len + ego.length);
  }
  if (ego.space_headway) return *ego.space_headway;
  *known = false;
  return 0.0;
}

CarFollowingSegment slice(const CarFollowingSegment& seg, std::size_t from, std::size_t to) {
  CarFollowingSegment out = seg;
  out.ego.assign(seg.ego.begin() + static_cast<std::ptrdiff_t>(from), seg.ego.begin() + static_cast<std::ptrdiff_t>(to));
  out.leader.assign(seg.leader.begin() + static_cast<std::ptrdiff_t>(from),
                    seg.leader.begin() + static_cast<std::ptrdiff_t>(to));
  return out;
}

}  // namespace

ScreenVerdict screen(const CarFollowingSegment& segment, const ScreeningRules& rules, const RoadNetwork* road) {
  ScreenVerdict v;
  v.trimmed = segment;
  auto reject = [&](RejectReason r) {
    v.keep = false;
    v.reason = r;
    return v;
  };
  const auto& ego = segment.ego;

  if (!rules.keep_lane_changes) {
    std::optional<int> lane;
    for (const auto& r : ego) {
      if (!r.lane_id) continue;
      if (lane && *lane != *r.lane_id) return reject(RejectReason::kLaneChange);
      lane = r.lane_id;
    }
  }
  const std::size_t min_frames = frames_for(rules.min_duration_s);
  if (ego.size() < min_frames) return reject(RejectReason::kDuration);
  if (std::hypot(ego.back().x - ego.front().x, ego.back().y - ego.front().y) < rules.min_travel_m) {
    return reject(RejectReason::kTravel);
  }
  const std::size_t trim = frames_for(rules.trim_s);
  if (ego.size() <= 2 * trim || ego.size() - 2 * trim < min_frames) {
    v.trimmed = slice(segment, 0, 0);
    return reject(RejectReason::kTrimmedTooShort);
  }
  v.trimmed = slice(segment, trim, ego.size() - trim);
  const auto& kept = v.trimmed.ego;

  if (rules.exclude_far_right_lane && road) {
    for (const auto& r : kept) {
      if (r.lane_id && road->is_far_right_or_ramp(*r.lane_id)) return reject(RejectReason::kFarRightLane);
    }
  }
  for (const auto& r : kept) {
    if (std::abs(r.accel) > rules.max_abs_accel) return reject(RejectReason::kAcceleration);
  }
  for (const auto& r : kept) {
    if (r.vehicle_class != rules.small_car_class) return reject(RejectReason::kVehicleClass);
  }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    bool known = false;
    const double gap = bumper_gap(kept[i], v.trimmed.leader[i], &known);
    if (known && gap < rules.min_gap_m) return reject(RejectReason::kGap);
  }
  v.keep = true;
  return v;
}

std::vector<double> sema_filter(std::span<const double> series, double dt, double width_s) {
  if (!(width_s > 0.0) || !(dt > 0.0)) throw DomainError("sEMA width and dt must be positive");
  const std::size_t n = series.size();
  std::vector<double> out(n);
  const auto half = static_cast<std::ptrdiff_t>(std::floor(3.0 * width_s / dt + 1e-9));
  for (std::size_t i = 0; i < n; ++i) {
    double num = 0.0, den = 0.0;
    for (std::ptrdiff_t k = -half; k <= half; ++k) {
      const auto j = static_cast<std::ptrdiff_t>(i) + k;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(n)) continue;
      const double w = std::exp(-std::abs(static_cast<double>(k) * dt) / width_s);
      num += w * series[static_cast<std::size_t>(j)];
      den += w;
    }
    out[i] = num / den;
  }
  return out;
}

CarFollowingSegment smooth_segment(const CarFollowingSegment& seg, double width_s) {
  CarFollowingSegment out = seg;
  auto smooth_xy = [&](auto get_x, auto get_y, auto set_xy, std::size_t n) {
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] = get_x(i);
      ys[i] = get_y(i);
    }
    const auto sx = sema_filter(xs, kFrameDt, width_s);
    const auto sy = sema_filter(ys, kFrameDt, width_s);
    for (std::size_t i = 0; i < n; ++i) set_xy(i, sx[i], sy[i]);
  };
  const std::size_t n = out.ego.size();
  smooth_xy([&](std::size_t i) { return out.ego[i].x; }, [&](std::size_t i) { return out.ego[i].y; },
            [&](std::size_t i, double x, double y) {
              out.ego[i].x = x;
              out.ego[i].y = y;
            },
            n);
  const bool leader_complete =
      std::all_of(out.leader.begin(), out.leader.end(), [](const auto& l) { return l.has_value(); });
  if (leader_complete && !out.leader.empty()) {
    smooth_xy([&](std::size_t i) { return out.leader[i]->x; }, [&](std::size_t i) { return out.leader[i]->y; },
              [&](std::size_t i, double x, double y) {
                out.leader[i]->x = x;
                out.leader[i]->y = y;
              },
              n);
  }
  return out;
}

namespace {

template <class Get>
std::vector<double> central_speed(std::size_t n, Get pos) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    const auto [x0, y0] = pos(lo);
    const auto [x1, y1] = pos(hi);
    v[i] = std::hypot(x1 - x0, y1 - y0) / (static_cast<double>(hi - lo) * kFrameDt);
  }
  return v;
}

std::vector<double> central_diff(const std::vector<double>& s) {
  const std::size_t n = s.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    d[i] = (s[hi] - s[lo]) / (static_cast<double>(hi - lo) * kFrameDt);
  }
  return d;
}

}  // namespace

CarFollowingSegment correct_kinematics(const CarFollowingSegment& seg) {
  const std::size_t n = seg.ego.size();
  if (n < 3) throw DomainError("segment too short for kinematic correction (need >= 3 samples)");
  CarFollowingSegment out = seg;
  const auto v = central_speed(n, [&](std::size_t i) { return std::pair{seg.ego[i].x, seg.ego[i].y}; });
  const auto a = central_diff(v);
  for (std::size_t i = 0; i < n; ++i) {
    out.ego[i].speed = v[i];
    out.ego[i].accel = a[i];
  }
  const bool leader_complete =
      std::all_of(seg.leader.begin(), seg.leader.end(), [](const auto& l) { return l.has_value(); });
  if (leader_complete) {
    const auto lv = central_speed(n, [&](std::size_t i) { return std::pair{seg.leader[i]->x, seg.leader[i]->y}; });
    const auto la = central_diff(lv);
    for (std::size_t i = 0; i < n; ++i) {
      out.leader[i]->speed = lv[i];
      out.leader[i]->accel = la[i];
    }
  }
  return out;
}

CarFollowingSegment correct_gap(const CarFollowingSegment& seg) {
  CarFollowingSegment out = seg;
  out.negative_gap = false;
  for (std::size_t i = 0; i < out.ego.size(); ++i) {
    auto& lead = out.leader[i];
    if (!lead) continue;
    if (!(lead->length > 0.0) || !std::isfinite(lead->length)) lead->length = kDefaultVehicleLength;
    const double gap =
        std::hypot(lead->x - out.ego[i].x, lead->y - out.ego[i].y) - 0.5 * (lead->length + out.ego[i].length);
    out.ego[i].space_headway = gap;
    if (gap < 0.0) out.negative_gap = true;
  }
  return out;
}

std::vector<CarFollowingSample> to_samples(const CarFollowingSegment& seg) {
  std::vector<CarFollowingSample> out;
  out.reserve(seg.ego.size());
  for (std::size_t i = 0; i < seg.ego.size(); ++i) {
    const auto& e = seg.ego[i];
    CarFollowingSample s;
    s.t = static_cast<double>(i) * kFrameDt;
    s.v = e.speed;
    if (seg.leader[i]) {
      s.leader_speed = seg.leader[i]->speed;
      s.leader_length = seg.leader[i]->length;
      bool known = false;
      s.gap = bumper_gap(e, seg.leader[i], &known);
    } else {
      s.leader_speed = e.speed;
      s.gap = e.space_headway.value_or(0.0);
    }
    s.dv = s.v - s.leader_speed;
    out.push_back(s);
  }
  return out;
}

std::vector<LaneChangeEvent> extract_lane_change_events(const Episode& episode, const EpisodeIndex* index,
                                                        const RoadNetwork* road) {
  std::vector<LaneChangeEvent> out;
  const auto& recs = episode.records;
  const std::size_t n = recs.size();
  if (n < 2) return out;

  std::vector<double> rel(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    const double dx = recs[hi].x - recs[lo].x;
    const double dy = recs[hi].y - recs[lo].y;
    if (std::hypot(dx, dy) < 1e-9) continue;
    double lane_heading = 0.0;
    if (road && recs[i].lane_id) {
      if (auto idx = road->index_of(*recs[i].lane_id)) {
        lane_heading = project_onto_lane(road->lanes[*idx], {recs[i].x, recs[i].y}).heading;
      }
    }
    rel[i] = wrap_angle(std::atan2(dy, dx) - lane_heading);
  }

  auto accel_of = [&](const TrajectoryRecord* r) { return r ? r->accel : 0.0; };

  for (std::size_t i = 1; i < n; ++i) {
    const auto& a = recs[i - 1];
    const auto& b = recs[i];
    if (!a.lane_id || !b.lane_id || *a.lane_id == *b.lane_id) continue;
    std::size_t start = i - 1, end = i;
    while (start > 0 && std::abs(rel[start]) > kLaneChangeHeadingThreshold &&
           std::abs(rel[start - 1]) > kLaneChangeHeadingThreshold) {
      --start;
    }
    while (end + 1 < n && std::abs(rel[end]) > kLaneChangeHeadingThreshold &&
           std::abs(rel[end + 1]) > kLaneChangeHeadingThreshold) {
      ++end;
    }
    std::size_t peak = start;
    for (std::size_t k = start; k <= end; ++k) {
      if (std::abs(rel[k]) > std::abs(rel[peak])) peak = k;
    }
    const std::size_t before = start == 0 ? 0 : start - 1;
    const std::size_t after = end + 1 < n ? end + 1 : end;

    LaneChangeEvent ev;
    ev.vehicle_id = episode.ego_id;
    ev.t_start = static_cast<double>(recs[start].frame) * kFrameDt;
    ev.t_end = static_cast<double>(recs[end].frame) * kFrameDt;
    ev.from_lane = *a.lane_id;
    ev.to_lane = *b.lane_id;
    ev.peak_heading = rel[peak];
    ev.a_c = recs[before].accel;
    ev.a_c_new = recs[after].accel;
    if (index) {
      const auto f0 = recs[before].frame;
      const auto f1 = recs[after].frame;
      if (const auto* o = index->follower_of(episode.ego_id, f0)) {
        ev.a_o = o->accel;
        ev.a_o_new = accel_of(index->find(o->vehicle_id, f1));
      }
      if (const auto* nf = index->follower_of(episode.ego_id, f1)) {
        ev.a_n_new = nf->accel;
        ev.a_n = accel_of(index->find(nf->vehicle_id, f0));
      }
    }
    out.push_back(ev);
  }
  return out;
}

PreprocessResult preprocess_corpus(const std::vector<Episode>& episodes, const ScreeningRules& rules,
                                   const RoadNetwork* road, double sema_width_s) {
  rules.validate();
  PreprocessResult result;
  const EpisodeIndex index(episodes);
  for (const auto& ep : episodes) {
    for (const auto& seg : extract_car_following(ep, &index)) {
      PreprocessOutcome o;
      o.segment_id = std::to_string(seg.vehicle_id) + "-" + std::to_string(seg.leader_id) + "-" +
                     std::to_string(seg.ego.front().frame);
      o.verdict = screen(seg, rules, road);
      if (o.verdict.keep) {
        result.kept.push_back(correct_gap(correct_kinematics(smooth_segment(o.verdict.trimmed, sema_width_s))));
      }
      result.outcomes.push_back(std::move(o));
    }
    const auto events = extract_lane_change_events(ep, &index, road);
    result.lane_changes.insert(result.lane_changes.end(), events.begin(), events.end());
  }
  return result;
}

std::string screening_report_csv(const std::vector<PreprocessOutcome>& outcomes) {
  std::string out = "segment_id,verdict,reason\n";
  for (const auto& o : outcomes) {
    out += o.segment_id + ',' + (o.verdict.keep ? "keep" : "reject") + ',' +
           (o.verdict.reason ? to_string(*o.verdict.reason) : "") + '\n';
  }
  return out;
}

}  // namespace natadv
