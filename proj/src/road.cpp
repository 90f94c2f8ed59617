#include "natadv/road.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "natadv/error.hpp"

namespace natadv {

using nlohmann::json;

std::optional<std::size_t> RoadNetwork::index_of(int lane_id) const {
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    if (lanes[i].id == lane_id) return i;
  }
  return std::nullopt;
}

bool RoadNetwork::is_far_right_or_ramp(int lane_id) const {
  const auto idx = index_of(lane_id);
  if (!idx) return false;
  if (lanes[*idx].kind == LaneKind::kAuxiliary) return true;
  // Far-right mainline lane: highest-index mainline lane.
  for (std::size_t i = lanes.size(); i-- > 0;) {
    if (lanes[i].kind == LaneKind::kMainline) return i == *idx;
  }
  return false;
}

LaneProjection project_onto_lane(const Lane& lane, const Vec2& p) {
  LaneProjection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  const auto& pts = lane.centerline;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const Vec2 seg = pts[i + 1] - pts[i];
    const double len2 = seg.dot(seg);
    if (len2 <= 0.0) continue;
    const double t_raw = (p - pts[i]).dot(seg) / len2;
    const double t = std::clamp(t_raw, 0.0, 1.0);
    const Vec2 foot = pts[i] + seg * t;
    const Vec2 d = p - foot;
    const double d2 = d.dot(d);
    if (d2 < best_d2) {
      best_d2 = d2;
      const double seg_len = std::sqrt(len2);
      best.s = lane.arc[i] + t * seg_len;
      best.heading = std::atan2(seg.y, seg.x);
      // Signed offset measured against the segment direction even past the
      // ends, so a point beyond the last vertex still reports its side.
      best.lateral = seg.cross(p - pts[i]) / seg_len;
      const bool before_start = (i == 0 && t_raw < 0.0);
      const bool after_end = (i + 2 == pts.size() && t_raw > 1.0);
      best.inside = !before_start && !after_end;
    }
  }
  return best;
}

std::optional<std::size_t> locate_lane(const RoadNetwork& road, const Vec2& p) {
  std::optional<std::size_t> best;
  double best_off = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < road.lanes.size(); ++i) {
    const auto proj = project_onto_lane(road.lanes[i], p);
    const double off = std::abs(proj.lateral);
    if (!proj.inside || off > 0.5 * road.lanes[i].width) continue;
    if (off < best_off) {
      best_off = off;
      best = i;
    }
  }
  return best;
}

std::optional<std::size_t> nearest_lane(const RoadNetwork& road, const Vec2& p,
                                        double max_widths) {
  std::optional<std::size_t> best;
  double best_off = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < road.lanes.size(); ++i) {
    const auto proj = project_onto_lane(road.lanes[i], p);
    const double off = std::abs(proj.lateral);
    if (off > max_widths * road.lanes[i].width) continue;
    if (off < best_off) {
      best_off = off;
      best = i;
    }
  }
  return best;
}

namespace {

void finalize_arc(Lane& lane) {
  lane.arc.assign(lane.centerline.size(), 0.0);
  for (std::size_t i = 1; i < lane.centerline.size(); ++i) {
    lane.arc[i] = lane.arc[i - 1] + (lane.centerline[i] - lane.centerline[i - 1]).norm();
  }
}

LaneKind parse_kind(const json& j) {
  const std::string k = j.value("kind", std::string("mainline"));
  if (k == "mainline") return LaneKind::kMainline;
  if (k == "auxiliary" || k == "ramp") return LaneKind::kAuxiliary;
  throw SpecError("unknown lane kind '" + k + "'");
}

std::optional<std::size_t> parse_neighbor(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  const auto v = j.at(key).get<long long>();
  if (v < 0) throw SpecError(std::string("negative lane neighbor in '") + key + "'");
  return static_cast<std::size_t>(v);
}

Lane build_lane(const json& j) {
  Lane lane;
  lane.id = j.value("id", 0);
  lane.kind = parse_kind(j);
  lane.width = j.value("width", 3.7);
  if (!(lane.width > 0.0)) throw SpecError("lane width must be positive");
  lane.left = parse_neighbor(j, "left");
  lane.right = parse_neighbor(j, "right");

  if (j.contains("points")) {
    for (const auto& p : j.at("points")) {
      lane.centerline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
  } else {
    const json start = j.value("start", json::object());
    Vec2 pos{start.value("x", 0.0), start.value("y", 0.0)};
    double heading = start.value("heading", 0.0);
    lane.centerline.push_back(pos);
    for (const auto& seg : j.at("segments")) {
      const std::string type = seg.at("type").get<std::string>();
      if (type == "straight") {
        const double len = seg.at("length").get<double>();
        if (!(len > 0.0)) throw SpecError("straight segment length must be positive");
        pos = pos + unit_from_heading(heading) * len;
        lane.centerline.push_back(pos);
      } else if (type == "arc") {
        const double radius = seg.at("radius").get<double>();
        const double angle = seg.at("angle").get<double>();  // signed, left positive
        if (!(radius > 0.0)) throw SpecError("arc radius must be positive");
        if (angle == 0.0) continue;
        const double max_step = 2.0 * std::acos(std::max(-1.0, 1.0 - kMaxChordError / radius));
        const auto n = static_cast<std::size_t>(std::ceil(std::abs(angle) / max_step));
        const double side = angle > 0.0 ? 1.0 : -1.0;
        const Vec2 center = pos + unit_from_heading(heading + side * std::numbers::pi / 2) * radius;
        const double phi0 = heading - side * std::numbers::pi / 2;
        for (std::size_t k = 1; k <= n; ++k) {
          const double phi = phi0 + angle * static_cast<double>(k) / static_cast<double>(n);
          lane.centerline.push_back(center + unit_from_heading(phi) * radius);
        }
        pos = lane.centerline.back();
        heading += angle;
      } else {
        throw SpecError("unknown segment type '" + type + "'");
      }
    }
  }
  if (lane.centerline.size() < 2) throw SpecError("lane needs at least two centerline points");
  finalize_arc(lane);
  return lane;
}

}  // namespace

RoadNetwork make_straight_road(std::size_t lanes, double length, double width,
                               std::size_t auxiliary_lanes) {
  if (lanes == 0) throw SpecError("road must have at least one lane");
  if (!(width > 0.0) || !(length > 0.0)) throw SpecError("road width and length must be positive");
  RoadNetwork road;
  const std::size_t total = lanes + auxiliary_lanes;
  for (std::size_t i = 0; i < total; ++i) {
    Lane lane;
    lane.id = static_cast<int>(i);
    lane.kind = i < lanes ? LaneKind::kMainline : LaneKind::kAuxiliary;
    lane.width = width;
    const double y = static_cast<double>(total - 1 - i) * width;
    lane.centerline = {{0.0, y}, {length, y}};
    if (i > 0) lane.left = i - 1;
    if (i + 1 < total) lane.right = i + 1;
    finalize_arc(lane);
    road.lanes.push_back(std::move(lane));
  }
  return road;
}

RoadNetwork build_road(const json& spec) {
  if (spec.contains("parallel")) {
    const auto& p = spec.at("parallel");
    const long long lanes = p.value("lanes", 0LL);
    const long long aux = p.value("extra_lanes", 0LL);
    if (lanes <= 0) throw SpecError("road spec has no lanes");
    if (aux < 0) throw SpecError("negative auxiliary lane count");
    return make_straight_road(static_cast<std::size_t>(lanes), p.value("length", 640.0),
                              p.value("width", 3.7), static_cast<std::size_t>(aux));
  }
  if (!spec.contains("lanes") || !spec.at("lanes").is_array() || spec.at("lanes").empty()) {
    throw SpecError("road spec has no lanes");
  }
  RoadNetwork road;
  for (const auto& lj : spec.at("lanes")) road.lanes.push_back(build_lane(lj));

  const std::size_t n = road.lanes.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto& lane = road.lanes[i];
    if ((lane.left && *lane.left >= n) || (lane.right && *lane.right >= n)) {
      throw SpecError("lane neighbor index out of range");
    }
  }
  // Adjacency must be symmetric; wire the missing half when only one side is given.
  for (std::size_t i = 0; i < n; ++i) {
    if (auto l = road.lanes[i].left) {
      auto& other = road.lanes[*l].right;
      if (!other) other = i;
      else if (*other != i) throw SpecError("asymmetric lane adjacency");
    }
    if (auto r = road.lanes[i].right) {
      auto& other = road.lanes[*r].left;
      if (!other) other = i;
      else if (*other != i) throw SpecError("asymmetric lane adjacency");
    }
  }
  return road;
}

json road_to_json(const RoadNetwork& road) {
  json lanes = json::array();
  for (const auto& lane : road.lanes) {
    json pts = json::array();
    for (const auto& p : lane.centerline) pts.push_back({p.x, p.y});
    lanes.push_back({{"id", lane.id},
                     {"kind", lane.kind == LaneKind::kMainline ? "mainline" : "auxiliary"},
                     {"width", lane.width},
                     {"points", pts},
                     {"left", lane.left ? json(*lane.left) : json(nullptr)},
                     {"right", lane.right ? json(*lane.right) : json(nullptr)}});
  }
  return {{"lanes", lanes}};
}

}  // namespace natadv
