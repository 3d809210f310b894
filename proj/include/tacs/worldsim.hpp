#pragma once

#include <cstdint>
#include <optional>
#include <iosfwd>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "tacs/geometry.hpp"
#include "tacs/grid.hpp"

namespace tacs {

enum class Archetype { SingleRoom, Corridor, SquareLoop, MultiRoom, Mezzanine, LargeRoom };

std::string to_string(Archetype a);
Archetype archetype_from_string(const std::string& s);

/// Layout request for generate_world. Lengths in meters.
struct WorldSpec {
  Archetype archetype = Archetype::SingleRoom;
  double resolution = 0.1;
  int rooms = 1;
  double room_width = 6.0;
  double room_depth = 6.0;
  double corridor_length = 30.0;
  double corridor_width = 2.4;
  double loop_side = 16.0;
  double door_width = 0.8;
  double wall_thickness = 0.2;
  double drop_depth = 3.0;
  double ledge_opening = 2.4;
  /// Corridor only: depth of a dead-end alcove at mid length, zero for none.
  double alcove_depth = 0.0;
  /// Multi-room only: depth of a sunken atrium behind the rooms, each room
  /// opening onto it through a ledge of width ledge_opening; zero for none.
  double atrium_depth = 0.0;
  double margin = 1.0;
  /// Optional bound on the generated extent (meters); zero means unbounded.
  double max_extent_x = 0.0;
  double max_extent_y = 0.0;
};

void to_json(nlohmann::json& j, const WorldSpec& s);
void from_json(const nlohmann::json& j, WorldSpec& s);

enum class CellKind : std::uint8_t { Free = 0, Wall = 1, Railing = 2 };

struct GtRoom {
  std::vector<Vec2d> polygon;
  std::string type;  // "room", "corridor" or "atrium"
};

struct Segment {
  Vec2d a = Vec2d::Zero();
  Vec2d b = Vec2d::Zero();
};

/// 2.5D world: per-cell floor height plus obstacle cells, origin at (0, 0).
struct World {
  double resolution = 0.1;
  int width = 0;
  int height = 0;
  std::vector<double> floor;       // row-major, meters
  std::vector<CellKind> kind;      // row-major
  std::vector<GtRoom> gt_rooms;
  std::vector<Segment> walls_gt;
  /// Waypoints of a tour that exercises the layout; not part of the world itself.
  std::vector<Vec2d> suggested_tour;

  bool on_grid(const Cell& c) const { return c.x >= 0 && c.y >= 0 && c.x < width && c.y < height; }
  std::size_t index(const Cell& c) const { return std::size_t(c.y) * width + c.x; }
  bool is_obstacle(const Cell& c) const { return kind[index(c)] != CellKind::Free; }
  double floor_at(const Cell& c) const { return floor[index(c)]; }
  Vec2d extent_m() const { return {width * resolution, height * resolution}; }
};

nlohmann::json world_to_json(const World& w);
World world_from_json(const nlohmann::json& j);

struct SensorModel {
  double max_range = 10.0;
  int n_beams = 360;
  double range_noise_sigma = 0.01;
  double angular_origin = 0.0;
  double sensor_height = 0.5;
  /// Floor-height change along a beam that registers as a ground edge.
  double edge_threshold = 0.05;

  void validate() const;
  double beam_angle(int i) const;
};

void to_json(nlohmann::json& j, const SensorModel& s);
void from_json(const nlohmann::json& j, SensorModel& s);

struct NoiseModel {
  double odom_trans_sigma = 0.0;  // m per sqrt(m)
  double odom_rot_sigma = 0.0;    // rad per sqrt(m)
  Vec3d bias_per_meter = Vec3d::Zero();

  void validate() const;
};

void to_json(nlohmann::json& j, const NoiseModel& n);
void from_json(const nlohmann::json& j, NoiseModel& n);

/// One range beam. `edge_range` < 0 means the floor stayed level up to `range`.
struct Beam {
  double angle = 0.0;  // body frame
  double range = 0.0;
  double edge_range = -1.0;
  double edge_dh = 0.0;
};

struct Scan {
  double max_range = 10.0;
  std::vector<Beam> beams;

  /// Body-frame endpoints of beams that hit something before max_range.
  std::vector<Vec2d> hit_points() const;
};

struct RunStep {
  double t = 0.0;
  Pose2 true_pose;
  Pose2 odom_pose;
  Scan scan;
};

struct RunLog {
  SensorModel sensor;
  std::vector<RunStep> steps;
};

class WorldError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

World generate_world(const WorldSpec& spec, std::uint64_t seed);

/// Casts every beam of `sensor` from `pose`; rng == nullptr disables range noise.
Scan simulate_scan(const World& world, const Pose2& pose, const SensorModel& sensor, std::mt19937_64* rng);

RunLog simulate_run(const World& world, std::span<const Pose2> waypoints, const SensorModel& sensor,
                    const NoiseModel& noise, std::uint64_t seed);

/// Waypoint list from 2D points; headings follow the direction of travel.
std::vector<Pose2> tour_to_waypoints(std::span<const Vec2d> tour);

void write_runlog(const RunLog& log, std::ostream& out);
RunLog read_runlog(std::istream& in);

nlohmann::json trajectory_to_json(std::span<const Pose2> waypoints);
std::vector<Pose2> trajectory_from_json(const nlohmann::json& j);

/// Rasterizes a simple polygon into the cells whose centers lie inside it.
CellSet rasterize_polygon(std::span<const Vec2d> polygon, double resolution);

}  // namespace tacs
