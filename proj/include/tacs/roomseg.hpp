#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tacs/grid.hpp"
#include "tacs/traversability.hpp"
#include "tacs/walls.hpp"

namespace tacs {

/// Traversable graph restricted to nodes at least `lambda` meters from every obstacle cell.
struct SafeGraph {
  TraversableGraph graph;
  double lambda = 0.45;
};

SafeGraph compute_safe_graph(const TraversableGraph& trav, std::span<const Cell> obstacles, double lambda);

/// Component of the safe graph holding the safe node nearest the robot, or
/// empty when no safe node lies within one cell of the robot cell.
CellSet extract_inside(const SafeGraph& safe, const Pose2& robot_pose);

struct InsideGraph {
  int keyframe = -1;
  CellSet cells;
};

struct CompletedRoom {
  CellSet cells;
  std::vector<InsideGraph> parts;
  int start_keyframe = -1;
  int end_keyframe = -1;
};

/// Unions inside graphs until an empty one closes the room.
class RoomAccumulator {
 public:
  explicit RoomAccumulator(int min_inside_graphs = 1) : min_graphs_(min_inside_graphs) {}

  std::optional<CompletedRoom> accumulate(const CellSet& inside, int keyframe = -1);
  /// Closes whatever is pending, as if an empty inside graph had arrived.
  std::optional<CompletedRoom> flush();

  bool active() const { return !parts_.empty(); }
  std::size_t size() const { return parts_.size(); }

 private:
  int min_graphs_;
  std::vector<InsideGraph> parts_;
};

struct WallSupport {
  int id = -1;
  WallCategory category = WallCategory::XPlus;
  Line2<double> line;
  std::vector<Vec2d> points;  // map frame
};

struct WallChoice {
  int id = -1;
  int count = 0;
};

using BoundingSelection = std::array<std::optional<WallChoice>, 4>;

/// Number of `points` within `dist` of any cell square of `cells`.
int count_adjacent(std::span<const Vec2d> points, const CellSet& cells, double resolution, double dist);

/// Per category, the wall with the most inlier points adjacent to the room. Walls
/// with more than `max_outside_fraction` of the room behind them cut through it
/// and cannot bound it.
BoundingSelection select_bounding_walls(const CellSet& room, double resolution, std::span<const WallSupport> walls,
                                        double adjacency_dist = 0.5, double max_outside_fraction = 0.05);

enum class RoomType { CorridorX, CorridorY, FourWall };

std::string to_string(RoomType t);
RoomType room_type_from_string(const std::string& s);

/// Axis along which a room's center is constrained by walls. A corridor
/// running along y is bounded by x walls and is compared on x.
inline bool constrains_x(RoomType t) { return t != RoomType::CorridorX; }
inline bool constrains_y(RoomType t) { return t != RoomType::CorridorY; }

struct RoomNode {
  int id = -1;
  RoomType type = RoomType::FourWall;
  Vec2d center = Vec2d::Zero();
  std::array<int, 4> walls{-1, -1, -1, -1};  // by WallCategory, -1 when absent
  CellSet cells;
  std::vector<int> keyframes;

  int wall(WallCategory c) const { return walls[std::size_t(c)]; }
};

/// Center satisfying the wall-midpoint rule; the unconstrained axis of a
/// corridor takes the cell centroid.
Vec2d room_center_from_walls(RoomType type, const std::array<std::optional<Line2<double>>, 4>& lines,
                             const Vec2d& centroid);

Vec2d centroid(const CellSet& cells, double resolution);

struct RoomDecision {
  std::optional<RoomNode> room;
  std::string diagnostic;
};

RoomDecision classify_and_make_room(const BoundingSelection& selection, std::span<const WallSupport> walls,
                                    const CellSet& room_cells, double resolution, int min_adjacent = 25,
                                    double parallel_tol = deg2rad(10.0));

}  // namespace tacs
