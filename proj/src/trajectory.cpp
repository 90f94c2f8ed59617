#include "natadv/trajectory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <unordered_map>

#include "natadv/error.hpp"

namespace natadv {

Schema schema_from_string(const std::string& s) {
  if (s == "ngsim") return Schema::kNgsim;
  if (s == "interaction") return Schema::kInteraction;
  if (s == "canonical") return Schema::kCanonical;
  throw SchemaError("unknown trajectory schema '" + s + "'");
}

std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::kNgsimLike: return "ngsim";
    case DataSource::kInteractionLike: return "interaction";
    case DataSource::kSynthetic: return "synthetic";
  }
  return "?";
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  if (delim == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      out.push_back(line.substr(i, j - i));
      i = j;
    }
    return out;
  }
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    auto field = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    out.push_back(field);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

class RowReader {
 public:
  RowReader(const std::vector<std::string_view>& fields, std::size_t line)
      : fields_(fields), line_(line) {}

  double real(std::size_t col, const char* name) const {
    const auto f = field(col, name);
    double v = 0.0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec != std::errc() || res.ptr != f.data() + f.size() || !std::isfinite(v)) {
      throw ParseError(std::string("malformed number in column '") + name + "'", line_);
    }
    return v;
  }

  long long integer(std::size_t col, const char* name) const {
    const auto f = field(col, name);
    long long v = 0;
    const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
    if (res.ec == std::errc() && res.ptr == f.data() + f.size()) return v;
    // Some exports write integral columns as floats ("3.0").
    const double d = real(col, name);
    if (std::floor(d) != d) throw ParseError(std::string("non-integral value in column '") + name + "'", line_);
    return static_cast<long long>(d);
  }

  bool empty(std::size_t col) const { return col >= fields_.size() || fields_[col].empty(); }

  std::string_view field(std::size_t col, const char* name) const {
    if (col >= fields_.size()) {
      throw ParseError(std::string("missing field '") + name + "'", line_);
    }
    return fields_[col];
  }

 private:
  const std::vector<std::string_view>& fields_;
  std::size_t line_;
};

using ColumnMap = std::unordered_map<std::string, std::size_t>;

std::size_t require(const ColumnMap& cols, const std::string& name) {
  const auto it = cols.find(name);
  if (it == cols.end()) throw SchemaError("missing mandatory column '" + name + "'");
  return it->second;
}

std::optional<std::size_t> optional_col(const ColumnMap& cols, const std::string& name) {
  const auto it = cols.find(name);
  if (it == cols.end()) return std::nullopt;
  return it->second;
}

struct Layout {
  Schema schema;
  char delim = ',';
  ColumnMap cols;
};

TrajectoryRecord parse_row(const Layout& layout, const RowReader& row) {
  TrajectoryRecord r;
  const auto& c = layout.cols;
  switch (layout.schema) {
    case Schema::kCanonical: {
      r.vehicle_id = row.integer(require(c, "vehicle_id"), "vehicle_id");
      r.frame = row.integer(require(c, "frame"), "frame");
      r.x = row.real(require(c, "x_m"), "x_m");
      r.y = row.real(require(c, "y_m"), "y_m");
      r.speed = row.real(require(c, "speed_mps"), "speed_mps");
      r.accel = row.real(require(c, "accel_mps2"), "accel_mps2");
      if (const auto k = require(c, "lane_id"); !row.empty(k)) r.lane_id = static_cast<int>(row.integer(k, "lane_id"));
      if (const auto k = require(c, "preceding_id"); !row.empty(k)) r.preceding_id = row.integer(k, "preceding_id");
      if (const auto k = require(c, "space_headway_m"); !row.empty(k)) r.space_headway = row.real(k, "space_headway_m");
      if (const auto k = require(c, "vehicle_class"); !row.empty(k)) r.vehicle_class = static_cast<int>(row.integer(k, "vehicle_class"));
      r.length = row.real(require(c, "length_m"), "length_m");
      r.width = row.real(require(c, "width_m"), "width_m");
      break;
    }
    case Schema::kNgsim: {
      r.vehicle_id = row.integer(require(c, "Vehicle_ID"), "Vehicle_ID");
      r.frame = row.integer(require(c, "Frame_ID"), "Frame_ID");
      r.x = row.real(require(c, "Local_X"), "Local_X") * kFeetToMeters;
      r.y = row.real(require(c, "Local_Y"), "Local_Y") * kFeetToMeters;
      r.speed = row.real(require(c, "v_Vel"), "v_Vel") * kFeetToMeters;
      if (auto k = optional_col(c, "v_Acc"); k && !row.empty(*k)) r.accel = row.real(*k, "v_Acc") * kFeetToMeters;
      if (auto k = optional_col(c, "Lane_ID"); k && !row.empty(*k)) r.lane_id = static_cast<int>(row.integer(*k, "Lane_ID"));
      if (auto k = optional_col(c, "Preceding"); k && !row.empty(*k)) {
        const auto p = row.integer(*k, "Preceding");
        if (p != 0) r.preceding_id = p;  // 0 marks "no leader" in NGSIM
      }
      if (auto k = optional_col(c, "Space_Headway"); k && !row.empty(*k)) {
        const double h = row.real(*k, "Space_Headway");
        if (h > 0.0) r.space_headway = h * kFeetToMeters;
      }
      if (auto k = optional_col(c, "v_Class"); k && !row.empty(*k)) r.vehicle_class = static_cast<int>(row.integer(*k, "v_Class"));
      if (auto k = optional_col(c, "v_Length"); k && !row.empty(*k)) r.length = row.real(*k, "v_Length") * kFeetToMeters;
      if (auto k = optional_col(c, "v_Width"); k && !row.empty(*k)) r.width = row.real(*k, "v_Width") * kFeetToMeters;
      break;
    }
    case Schema::kInteraction: {
      r.vehicle_id = row.integer(require(c, "track_id"), "track_id");
      r.frame = row.integer(require(c, "frame_id"), "frame_id");
      r.x = row.real(require(c, "x"), "x");
      r.y = row.real(require(c, "y"), "y");
      const auto kvx = optional_col(c, "vx");
      const auto kvy = optional_col(c, "vy");
      if (kvx && kvy && !row.empty(*kvx) && !row.empty(*kvy)) {
        r.speed = std::hypot(row.real(*kvx, "vx"), row.real(*kvy, "vy"));
      }
      if (auto k = optional_col(c, "agent_type"); k && !row.empty(*k)) {
        const auto t = row.field(*k, "agent_type");
        if (t == "car") r.vehicle_class = 2;
        else if (t == "truck" || t == "bus") r.vehicle_class = 3;
      }
      if (auto k = optional_col(c, "length"); k && !row.empty(*k)) r.length = row.real(*k, "length");
      if (auto k = optional_col(c, "width"); k && !row.empty(*k)) r.width = row.real(*k, "width");
      break;
    }
  }
  if (!(r.length > 0.0) || !(r.width > 0.0)) {
    r.length = r.length > 0.0 ? r.length : kDefaultVehicleLength;
    r.width = r.width > 0.0 ? r.width : kDefaultVehicleWidth;
  }
  return r;
}

// INTERACTION tracks carry no acceleration; derive it from speed differences.
void fill_interaction_accel(Episode& ep) {
  const auto n = ep.records.size();
  if (n < 2) return;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    const double dt = static_cast<double>(ep.records[hi].frame - ep.records[lo].frame) * kFrameDt;
    ep.records[i].accel = dt > 0.0 ? (ep.records[hi].speed - ep.records[lo].speed) / dt : 0.0;
  }
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<Episode> parse_trajectories(std::string_view text, Schema schema) {
  std::vector<Episode> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::optional<Layout> layout;
  std::map<VehicleId, std::vector<std::pair<TrajectoryRecord, std::size_t>>> by_vehicle;

  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    if (!layout) {
      Layout l;
      l.schema = schema;
      l.delim = line.find(',') != std::string_view::npos ? ',' : ' ';
      const auto names = split_fields(line, l.delim);
      for (std::size_t i = 0; i < names.size(); ++i) l.cols.emplace(std::string(names[i]), i);
      // Validate mandatory columns up front so an empty body still fails.
      switch (schema) {
        case Schema::kCanonical:
          for (const char* n : {"vehicle_id", "frame", "x_m", "y_m", "speed_mps", "accel_mps2", "lane_id",
                                "preceding_id", "space_headway_m", "vehicle_class", "length_m", "width_m"}) {
            require(l.cols, n);
          }
          break;
        case Schema::kNgsim:
          for (const char* n : {"Vehicle_ID", "Frame_ID", "Local_X", "Local_Y", "v_Vel"}) require(l.cols, n);
          break;
        case Schema::kInteraction:
          for (const char* n : {"track_id", "frame_id", "x", "y"}) require(l.cols, n);
          break;
      }
      layout = std::move(l);
      continue;
    }
    const auto fields = split_fields(line, layout->delim);
    if (fields.size() < layout->cols.size()) {
      throw ParseError("expected " + std::to_string(layout->cols.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const RowReader row(fields, line_no);
    auto rec = parse_row(*layout, row);
    by_vehicle[rec.vehicle_id].emplace_back(std::move(rec), line_no);
  }

  const DataSource source = schema == Schema::kNgsim         ? DataSource::kNgsimLike
                            : schema == Schema::kInteraction ? DataSource::kInteractionLike
                                                             : DataSource::kSynthetic;
  for (auto& [id, rows] : by_vehicle) {
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.first.frame < b.first.frame; });
    Episode ep;
    ep.ego_id = id;
    ep.source = source;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].first.frame == rows[i - 1].first.frame) {
        throw ParseError("duplicate frame " + std::to_string(rows[i].first.frame) + " for vehicle " +
                             std::to_string(id),
                         rows[i].second);
      }
      ep.records.push_back(rows[i].first);
    }
    if (schema == Schema::kInteraction) fill_interaction_accel(ep);
    out.push_back(std::move(ep));
  }
  return out;
}

std::string serialize_canonical(const std::vector<Episode>& episodes) {
  std::string out = std::string(kCanonicalHeader) + "\n";
  for (const auto& ep : episodes) {
    for (const auto& r : ep.records) {
      out += std::to_string(r.vehicle_id) + ',' + std::to_string(r.frame) + ',' + fmt_double(r.x) + ',' +
             fmt_double(r.y) + ',' + fmt_double(r.speed) + ',' + fmt_double(r.accel) + ',';
      if (r.lane_id) out += std::to_string(*r.lane_id);
      out += ',';
      if (r.preceding_id) out += std::to_string(*r.preceding_id);
      out += ',';
      if (r.space_headway) out += fmt_double(*r.space_headway);
      out += ',';
      if (r.vehicle_class) out += std::to_string(*r.vehicle_class);
      out += ',' + fmt_double(r.length) + ',' + fmt_double(r.width) + '\n';
    }
  }
  return out;
}

std::vector<TrajectoryRecord> records_by_frame(const std::vector<Episode>& episodes) {
  std::vector<TrajectoryRecord> all;
  for (const auto& ep : episodes) all.insert(all.end(), ep.records.begin(), ep.records.end());
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    return a.frame != b.frame ? a.frame < b.frame : a.vehicle_id < b.vehicle_id;
  });
  return all;
}

std::vector<Episode> infer_lane_and_leader(const std::vector<Episode>& episodes,
                                           const RoadNetwork& road) {
  std::vector<Episode> out = episodes;
  struct Slot {
    std::size_t ep;
    std::size_t rec;
    std::optional<std::size_t> lane;
    double s = 0.0;
  };
  std::map<std::int64_t, std::vector<Slot>> frames;
  for (std::size_t e = 0; e < out.size(); ++e) {
    for (std::size_t k = 0; k < out[e].records.size(); ++k) {
      auto& r = out[e].records[k];
      Slot slot{e, k, nearest_lane(road, {r.x, r.y}), 0.0};
      if (slot.lane) {
        slot.s = project_onto_lane(road.lanes[*slot.lane], {r.x, r.y}).s;
        r.lane_id = road.lanes[*slot.lane].id;
      } else {
        r.lane_id.reset();
      }
      frames[r.frame].push_back(slot);
    }
  }
  for (auto& [frame, slots] : frames) {
    for (const auto& me : slots) {
      auto& r = out[me.ep].records[me.rec];
      r.preceding_id.reset();
      r.space_headway.reset();
      if (!me.lane) continue;
      const Slot* best = nullptr;
      for (const auto& other : slots) {
        if (&other == &me || other.lane != me.lane || !(other.s > me.s)) continue;
        const auto& orec = out[other.ep].records[other.rec];
        if (!best || other.s < best->s ||
            (other.s == best->s && orec.vehicle_id < out[best->ep].records[best->rec].vehicle_id)) {
          best = &other;
        }
      }
      if (best) {
        const auto& lead = out[best->ep].records[best->rec];
        r.preceding_id = lead.vehicle_id;
        r.space_headway = (best->s - me.s) - 0.5 * (lead.length + r.length);
      }
    }
  }
  return out;
}

}  // namespace natadv
