#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "natadv/road.hpp"
#include "natadv/sim.hpp"

namespace natadv {

inline constexpr double kFeetToMeters = 0.3048;
inline constexpr double kFrameDt = 0.1;  // datasets are sampled at 10 Hz

struct TrajectoryRecord {
  VehicleId vehicle_id = 0;
  std::int64_t frame = 0;
  double x = 0.0;  // meters
  double y = 0.0;
  double speed = 0.0;  // m/s
  double accel = 0.0;  // m/s^2
  std::optional<int> lane_id;
  std::optional<VehicleId> preceding_id;
  std::optional<double> space_headway;  // meters
  std::optional<int> vehicle_class;
  double length = kDefaultVehicleLength;
  double width = kDefaultVehicleWidth;

  bool operator==(const TrajectoryRecord&) const = default;
};

enum class DataSource { kNgsimLike, kInteractionLike, kSynthetic };
enum class Schema { kNgsim, kInteraction, kCanonical };

Schema schema_from_string(const std::string& s);
std::string to_string(DataSource s);

struct Episode {
  VehicleId ego_id = 0;
  std::vector<TrajectoryRecord> records;  // strictly increasing frames
  DataSource source = DataSource::kSynthetic;

  bool operator==(const Episode&) const = default;
};

inline constexpr const char* kCanonicalHeader =
    "vehicle_id,frame,x_m,y_m,speed_mps,accel_mps2,lane_id,preceding_id,space_headway_m,"
    "vehicle_class,length_m,width_m";

// One Episode per vehicle id (ascending), records sorted by frame. NGSIM
// input is converted from feet; NGSIM's Local_X/Local_Y map to x/y directly.
// Throws ParseError (with 1-based line number) or SchemaError.
std::vector<Episode> parse_trajectories(std::string_view text, Schema schema);

std::string serialize_canonical(const std::vector<Episode>& episodes);

// Lane = nearest centerline (ties to the lower index; none beyond two lane
// widths). Leader = nearest vehicle ahead along the same lane in the same
// frame; space_headway = bumper-to-bumper gap.
std::vector<Episode> infer_lane_and_leader(const std::vector<Episode>& episodes,
                                           const RoadNetwork& road);

// Flat list of all records, ordered by (frame, vehicle_id).
std::vector<TrajectoryRecord> records_by_frame(const std::vector<Episode>& episodes);

}  // namespace natadv
