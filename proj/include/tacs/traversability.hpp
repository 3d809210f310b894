#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tacs/geometry.hpp"
#include "tacs/grid.hpp"
#include "tacs/worldsim.hpp"

namespace tacs {

struct RobotModel {
  double max_step = 0.15;
  double max_slope = deg2rad(30.0);
  double radius = 0.3;
};

enum class CellState : std::uint8_t { Unknown, Observed, Inferred };

struct FieldCell {
  CellState state = CellState::Unknown;
  bool obstacle = false;     // Observed only
  bool traversable = false;  // derived, see TraversabilityField::classify
  bool swept = false;        // crossed by any beam before its return
  double height = 0.0;
  double score = 0.0;        // Inferred only
};

/// Traversability over a fixed rectangular window of cells.
class TraversabilityField {
 public:
  TraversabilityField() = default;
  TraversabilityField(Cell origin, int width, int height, double resolution, RobotModel robot = {},
                      double score_threshold = 0.5);

  /// Square window of half side `half_extent` meters centered on `center`.
  static TraversabilityField around(const Vec2d& center, double half_extent, double resolution, RobotModel robot = {},
                                    double score_threshold = 0.5);

  double resolution() const { return resolution_; }
  const RobotModel& robot() const { return robot_; }
  double score_threshold() const { return score_threshold_; }
  const DenseGrid<FieldCell>& grid() const { return grid_; }

  bool contains(const Cell& c) const { return grid_.contains(c); }
  const FieldCell& at(const Cell& c) const { return grid_[c]; }

  /// Observations. Obstacles are sticky: later ground observations never clear them.
  void observe_ground(const Cell& c, double height);
  void observe_ground_if_unknown(const Cell& c, double height);
  void observe_obstacle(const Cell& c);
  void mark_swept(const Cell& c);
  void set_inferred(const Cell& c, double score, double height);

  /// Recomputes the traversable flag of every cell from the step and slope limits.
  void classify();

  bool is_traversable(const Cell& c) const { return contains(c) && grid_[c].traversable; }

 private:
  double resolution_ = 0.1;
  RobotModel robot_{};
  double score_threshold_ = 0.5;
  DenseGrid<FieldCell> grid_;
};

/// Integrates one scan taken at `pose` (robot floor at height 0).
void update_field(TraversabilityField& field, const Scan& scan, const Pose2& pose);

/// Compact support kernel of length l; k(0) = 1 and k(d >= l) = 0.
double bgk_kernel(double d, double l);

/// Fills Unknown cells near Observed ones with kernel-weighted traversability
/// scores (kernel length 3 cells), then reclassifies.
void infer_occluded(TraversabilityField& field);

struct TravNode {
  Cell cell;
  Vec2d position = Vec2d::Zero();
  double score = 1.0;
  double height = 0.0;
};

/// Connected graph of traversable cells; node 0 is the root.
struct TraversableGraph {
  std::vector<TravNode> nodes;
  std::vector<std::pair<int, int>> edges;  // i < j
  double resolution = 0.1;

  bool empty() const { return nodes.empty(); }
  CellSet cell_set() const;
};

class NotTraversableError : public std::runtime_error {
 public:
  NotTraversableError(const std::string& what, std::optional<Cell> nearest)
      : std::runtime_error(what), nearest(nearest) {}
  std::optional<Cell> nearest;
};

/// BFS over 8-connected traversable cells whose height step is within max_step.
TraversableGraph build_traversable_graph(const TraversabilityField& field, const Pose2& robot_pose);

/// Flood fill from `start` over 8-neighbors accepted by `node_ok` and joined by `edge_ok`.
template <typename NodeOk, typename EdgeOk>
TraversableGraph flood_graph(const TraversabilityField& field, const Cell& start, NodeOk&& node_ok, EdgeOk&& edge_ok);

/// Free-space graph of the Euclidean baseline: swept, non-obstacle cells reachable from the robot.
TraversableGraph build_free_space_graph(const TraversabilityField& field, const Pose2& robot_pose);

void write_pgm(const TraversabilityField& field, std::ostream& out);
nlohmann::json graph_to_json(const TraversableGraph& g);

// ---------------------------------------------------------------------------

template <typename NodeOk, typename EdgeOk>
TraversableGraph flood_graph(const TraversabilityField& field, const Cell& start, NodeOk&& node_ok, EdgeOk&& edge_ok) {
  TraversableGraph g;
  g.resolution = field.resolution();
  if (!field.contains(start) || !node_ok(start)) return g;
  const auto& grid = field.grid();
  DenseGrid<int> id(grid.origin(), grid.width(), grid.height(), -1);
  auto push = [&](const Cell& c) {
    id[c] = int(g.nodes.size());
    const auto& fc = field.at(c);
    g.nodes.push_back({c, cell_center(c, g.resolution), fc.state == CellState::Inferred ? fc.score : 1.0, fc.height});
  };
  push(start);
  for (std::size_t head = 0; head < g.nodes.size(); ++head) {
    const Cell c = g.nodes[head].cell;
    for (const auto& o : kNeighbors8) {
      const Cell n{c.x + o.x, c.y + o.y};
      if (!field.contains(n) || id[n] >= 0 || !node_ok(n) || !edge_ok(c, n)) continue;
      push(n);
    }
  }
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Cell c = g.nodes[i].cell;
    for (const auto& o : kNeighbors8) {
      const Cell n{c.x + o.x, c.y + o.y};
      if (!field.contains(n)) continue;
      const int j = id[n];
      if (j > int(i) && edge_ok(c, n)) g.edges.emplace_back(int(i), j);
    }
  }
  return g;
}

}  // namespace tacs
