#include "tacs/roomseg.hpp"

#include <Eigen/LU>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace tacs {

SafeGraph compute_safe_graph(const TraversableGraph& trav, std::span<const Cell> obstacles, double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("compute_safe_graph: lambda must be positive");
  SafeGraph out;
  out.lambda = lambda;
  out.graph.resolution = trav.resolution;
  if (trav.empty()) return out;

  const double res = trav.resolution;
  const int pad = int(std::ceil(lambda / res)) + 1;
  Cell lo = trav.nodes[0].cell, hi = lo;
  for (const auto& n : trav.nodes) {
    lo = {std::min(lo.x, n.cell.x), std::min(lo.y, n.cell.y)};
    hi = {std::max(hi.x, n.cell.x), std::max(hi.y, n.cell.y)};
  }
  lo = {lo.x - pad, lo.y - pad};
  hi = {hi.x + pad, hi.y + pad};
  const int w = hi.x - lo.x + 1, h = hi.y - lo.y + 1;
  DenseGrid<std::uint8_t> src(lo, w, h, 0);
  for (const auto& c : obstacles)
    if (src.contains(c)) src[c] = 1;
  const auto d2 = squared_distance_transform(w, h, src.data());

  std::vector<int> remap(trav.nodes.size(), -1);
  for (std::size_t i = 0; i < trav.nodes.size(); ++i) {
    const double dist = std::sqrt(d2[src.index(trav.nodes[i].cell)]) * res;
    if (dist >= lambda - 1e-9) {
      remap[i] = int(out.graph.nodes.size());
      out.graph.nodes.push_back(trav.nodes[i]);
    }
  }
  for (const auto& [a, b] : trav.edges)
    if (remap[a] >= 0 && remap[b] >= 0) out.graph.edges.emplace_back(remap[a], remap[b]);
  return out;
}

CellSet extract_inside(const SafeGraph& safe, const Pose2& robot_pose) {
  const auto& g = safe.graph;
  if (g.empty()) return {};
  const Cell rc = cell_of(robot_pose.t, g.resolution);
  int start = -1;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const Cell c = g.nodes[i].cell;
    if (std::abs(c.x - rc.x) > 1 || std::abs(c.y - rc.y) > 1) continue;
    const double d = (g.nodes[i].position - robot_pose.t).squaredNorm();
    if (d < best) {
      best = d;
      start = int(i);
    }
  }
  if (start < 0) return {};

  std::vector<std::vector<int>> adj(g.nodes.size());
  for (const auto& [a, b] : g.edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<char> seen(g.nodes.size(), 0);
  std::vector<Cell> cells;
  std::deque<int> queue{start};
  seen[start] = 1;
  while (!queue.empty()) {
    const int i = queue.front();
    queue.pop_front();
    cells.push_back(g.nodes[i].cell);
    for (int j : adj[i])
      if (!seen[j]) {
        seen[j] = 1;
        queue.push_back(j);
      }
  }
  return CellSet(std::move(cells));
}

std::optional<CompletedRoom> RoomAccumulator::accumulate(const CellSet& inside, int keyframe) {
  if (!inside.empty()) {
    parts_.push_back({keyframe, inside});
    return std::nullopt;
  }
  return flush();
}

std::optional<CompletedRoom> RoomAccumulator::flush() {
  if (parts_.empty()) return std::nullopt;
  std::vector<InsideGraph> parts;
  parts.swap(parts_);
  if (int(parts.size()) < min_graphs_) return std::nullopt;
  CompletedRoom room;
  for (const auto& p : parts) room.cells = room.cells.united(p.cells);
  room.start_keyframe = parts.front().keyframe;
  room.end_keyframe = parts.back().keyframe;
  room.parts = std::move(parts);
  return room;
}

int count_adjacent(std::span<const Vec2d> points, const CellSet& cells, double resolution, double dist) {
  const int reach = int(std::ceil(dist / resolution)) + 1;
  const double half = 0.5 * resolution;
  int count = 0;
  for (const auto& p : points) {
    const Cell pc = cell_of(p, resolution);
    bool adjacent = false;
    for (int dy = -reach; dy <= reach && !adjacent; ++dy)
      for (int dx = -reach; dx <= reach && !adjacent; ++dx) {
        const Cell c{pc.x + dx, pc.y + dy};
        const Vec2d cc = cell_center(c, resolution);
        const double ex = std::max(0.0, std::abs(p.x() - cc.x()) - half);
        const double ey = std::max(0.0, std::abs(p.y() - cc.y()) - half);
        if (ex * ex + ey * ey <= dist * dist && cells.contains(c)) adjacent = true;
      }
    count += adjacent;
  }
  return count;
}

Vec2d centroid(const CellSet& cells, double resolution) {
  Vec2d c = Vec2d::Zero();
  for (const auto& cell : cells) c += cell_center(cell, resolution);
  return cells.empty() ? c : Vec2d(c / double(cells.size()));
}

BoundingSelection select_bounding_walls(const CellSet& room, double resolution, std::span<const WallSupport> walls,
                                        double adjacency_dist, double max_outside_fraction) {
  BoundingSelection sel;
  std::array<double, 4> tie_dist;
  tie_dist.fill(std::numeric_limits<double>::infinity());
  const Vec2d c = centroid(room, resolution);
  for (const auto& w : walls) {
    const int n = count_adjacent(w.points, room, resolution, adjacency_dist);
    if (n == 0) continue;
    std::size_t behind = 0;
    for (const auto& cell : room) behind += w.line.signed_distance(cell_center(cell, resolution)) < 0;
    if (double(behind) > max_outside_fraction * double(room.size())) continue;
    const auto k = std::size_t(w.category);
    const double dist = std::abs(w.line.signed_distance(c));
    if (!sel[k] || n > sel[k]->count || (n == sel[k]->count && dist < tie_dist[k])) {
      sel[k] = WallChoice{w.id, n};
      tie_dist[k] = dist;
    }
  }
  return sel;
}

std::string to_string(RoomType t) {
  switch (t) {
    case RoomType::CorridorX: return "corridor_x";
    case RoomType::CorridorY: return "corridor_y";
    case RoomType::FourWall: return "four_wall";
  }
  return "?";
}

RoomType room_type_from_string(const std::string& s) {
  for (auto t : {RoomType::CorridorX, RoomType::CorridorY, RoomType::FourWall})
    if (to_string(t) == s) return t;
  throw std::invalid_argument("unknown room type '" + s + "'");
}

namespace {

/// Offset along `plus.normal()` from `p` to the midpoint of the pair (+, -).
double pair_residual(const Line2<double>& plus, const Line2<double>& minus, const Vec2d& p) {
  return 0.5 * (plus.signed_distance(p) - minus.signed_distance(p));
}

}  // namespace

Vec2d room_center_from_walls(RoomType type, const std::array<std::optional<Line2<double>>, 4>& lines,
                             const Vec2d& centroid) {
  const auto& xp = lines[0];
  const auto& xm = lines[1];
  const auto& yp = lines[2];
  const auto& ym = lines[3];
  if (type == RoomType::FourWall) {
    // residuals are affine in the center; solve the 2x2 system
    Mat2d A;
    Vec2d b;
    A.row(0) = 0.5 * (xp->normal() - xm->normal()).transpose();
    A.row(1) = 0.5 * (yp->normal() - ym->normal()).transpose();
    b << 0.5 * (xp->d - xm->d), 0.5 * (yp->d - ym->d);
    return A.fullPivLu().solve(b);
  }
  const auto& plus = type == RoomType::CorridorY ? *xp : *yp;
  const auto& minus = type == RoomType::CorridorY ? *xm : *ym;
  const Vec2d n = plus.normal();
  const double slope = 0.5 * (1.0 - minus.normal().dot(n));
  const double s = -pair_residual(plus, minus, centroid) / slope;
  return centroid + s * n;
}

RoomDecision classify_and_make_room(const BoundingSelection& selection, std::span<const WallSupport> walls,
                                    const CellSet& room_cells, double resolution, int min_adjacent,
                                    double parallel_tol) {
  RoomDecision out;
  auto ok = [&](WallCategory c) {
    const auto& s = selection[std::size_t(c)];
    return s && s->count >= min_adjacent;
  };
  const bool x_pair = ok(WallCategory::XPlus) && ok(WallCategory::XMinus);
  const bool y_pair = ok(WallCategory::YPlus) && ok(WallCategory::YMinus);
  RoomType type;
  if (x_pair && y_pair)
    type = RoomType::FourWall;
  else if (x_pair)
    type = RoomType::CorridorY;
  else if (y_pair)
    type = RoomType::CorridorX;
  else {
    out.diagnostic = "no parallel wall pair with enough adjacent points";
    return out;
  }

  std::array<std::optional<Line2<double>>, 4> lines;
  auto find_line = [&](int id) -> std::optional<Line2<double>> {
    for (const auto& w : walls)
      if (w.id == id) return w.line;
    return std::nullopt;
  };
  RoomNode node;
  node.type = type;
  for (auto c : {WallCategory::XPlus, WallCategory::XMinus, WallCategory::YPlus, WallCategory::YMinus}) {
    const bool used = ((c == WallCategory::XPlus || c == WallCategory::XMinus) && constrains_x(type)) ||
                      ((c == WallCategory::YPlus || c == WallCategory::YMinus) && constrains_y(type));
    if (!used) continue;
    const int id = selection[std::size_t(c)]->id;
    lines[std::size_t(c)] = find_line(id);
    if (!lines[std::size_t(c)]) {
      out.diagnostic = "selected wall " + std::to_string(id) + " is not in the wall list";
      return out;
    }
    node.walls[std::size_t(c)] = id;
  }
  auto parallel = [&](std::size_t a, std::size_t b) {
    if (!lines[a]) return true;
    return std::abs(wrap_angle(lines[a]->phi - lines[b]->phi - std::numbers::pi)) <= parallel_tol;
  };
  if (!parallel(0, 1) || !parallel(2, 3)) {
    out.diagnostic = "bounding wall pair is not parallel within tolerance";
    return out;
  }
  node.center = room_center_from_walls(type, lines, centroid(room_cells, resolution));
  node.cells = room_cells;
  out.room = std::move(node);
  return out;
}

}  // namespace tacs
