#include "tacs/traversability.hpp"

#include <cmath>
#include <ostream>

namespace tacs {

TraversabilityField::TraversabilityField(Cell origin, int width, int height, double resolution, RobotModel robot,
                                         double score_threshold)
    : resolution_(resolution), robot_(robot), score_threshold_(score_threshold), grid_(origin, width, height) {
  if (!(resolution > 0)) throw std::invalid_argument("TraversabilityField: resolution must be positive");
}

TraversabilityField TraversabilityField::around(const Vec2d& center, double half_extent, double resolution,
                                                RobotModel robot, double score_threshold) {
  const Cell lo = cell_of(center - Vec2d::Constant(half_extent), resolution);
  const Cell hi = cell_of(center + Vec2d::Constant(half_extent), resolution);
  return TraversabilityField(lo, hi.x - lo.x + 1, hi.y - lo.y + 1, resolution, robot, score_threshold);
}

void TraversabilityField::observe_ground(const Cell& c, double height) {
  if (!contains(c)) return;
  auto& fc = grid_[c];
  if (fc.state == CellState::Observed && fc.obstacle) return;
  fc.state = CellState::Observed;
  fc.height = height;
}

void TraversabilityField::observe_ground_if_unknown(const Cell& c, double height) {
  if (!contains(c) || grid_[c].state == CellState::Observed) return;
  observe_ground(c, height);
}

void TraversabilityField::observe_obstacle(const Cell& c) {
  if (!contains(c)) return;
  auto& fc = grid_[c];
  fc.state = CellState::Observed;
  fc.obstacle = true;
}

void TraversabilityField::mark_swept(const Cell& c) {
  if (contains(c)) grid_[c].swept = true;
}

void TraversabilityField::set_inferred(const Cell& c, double score, double height) {
  if (!contains(c) || grid_[c].state == CellState::Observed) return;
  auto& fc = grid_[c];
  fc.state = CellState::Inferred;
  fc.score = std::clamp(score, 0.0, 1.0);
  fc.height = height;
}

void TraversabilityField::classify() {
  const double tan_slope = std::tan(robot_.max_slope);
  auto ground = [&](const Cell& c) -> const FieldCell* {
    if (!contains(c)) return nullptr;
    const auto& fc = grid_[c];
    return fc.state == CellState::Observed && !fc.obstacle ? &fc : nullptr;
  };
  auto gradient = [&](const Cell& c, int dx, int dy, double h) {
    const FieldCell* p = ground({c.x + dx, c.y + dy});
    const FieldCell* m = ground({c.x - dx, c.y - dy});
    if (p && m) return (p->height - m->height) / (2 * resolution_);
    if (p) return (p->height - h) / resolution_;
    if (m) return (h - m->height) / resolution_;
    return 0.0;
  };
  for (std::size_t i = 0; i < grid_.data().size(); ++i) {
    auto& fc = grid_.at(i);
    switch (fc.state) {
      case CellState::Unknown: fc.traversable = false; break;
      case CellState::Inferred: fc.traversable = fc.score >= score_threshold_; break;
      case CellState::Observed: {
        if (fc.obstacle) {
          fc.traversable = false;
          break;
        }
        const Cell c = grid_.cell(i);
        bool ok = true;
        for (const auto& o : kNeighbors8) {
          const FieldCell* n = ground({c.x + o.x, c.y + o.y});
          if (n && std::abs(n->height - fc.height) > robot_.max_step) {
            ok = false;
            break;
          }
        }
        if (ok) {
          const double gx = gradient(c, 1, 0, fc.height), gy = gradient(c, 0, 1, fc.height);
          ok = std::hypot(gx, gy) <= tan_slope + 1e-12;
        }
        fc.traversable = ok;
        break;
      }
    }
  }
}

void update_field(TraversabilityField& field, const Scan& scan, const Pose2& pose) {
  const double res = field.resolution();
  // Returns from range noise can land just before the true boundary; probe a
  // quarter cell past the measured distance to pick the surface cell.
  const double probe = 0.25 * res;
  for (const auto& beam : scan.beams) {
    const double heading = pose.theta + beam.angle;
    const Vec2d dir(std::cos(heading), std::sin(heading));
    const bool hit = beam.range < scan.max_range;
    const bool edge = beam.edge_range >= 0 && beam.edge_range <= beam.range;
    const double ground_limit = edge ? beam.edge_range : beam.range;
    march_ray(pose.t, dir, beam.range, res, [&](const Cell& c, double t0, double t1) {
      if (!field.contains(c)) return false;
      if (0.5 * (t0 + t1) < ground_limit) field.observe_ground_if_unknown(c, 0.0);
      field.mark_swept(c);
      return true;
    });
    if (edge) field.observe_ground(cell_of(pose.t + dir * (beam.edge_range + probe), res), beam.edge_dh);
    if (hit) field.observe_obstacle(cell_of(pose.t + dir * (beam.range + probe), res));
  }
  // At long range neighbouring returns land more than a cell apart; joining
  // them keeps a surface watertight so clearance is not measured through gaps.
  const double join = 3 * res;
  const std::size_t n = scan.beams.size();
  auto endpoint = [&](const Beam& b) {
    const double h = pose.theta + b.angle;
    return Vec2d(pose.t + Vec2d(std::cos(h), std::sin(h)) * (b.range + probe));
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Beam& a = scan.beams[i];
    const Beam& b = scan.beams[(i + 1) % n];
    if (a.range >= scan.max_range || b.range >= scan.max_range) continue;
    const Vec2d pa = endpoint(a), pb = endpoint(b);
    const double len = (pb - pa).norm();
    if (len > join) continue;
    const int steps = int(std::ceil(len / (0.5 * res)));
    for (int k = 1; k < steps; ++k) {
      const Cell c = cell_of(pa + (pb - pa) * (double(k) / steps), res);
      if (field.contains(c)) field.observe_obstacle(c);
    }
  }
}

double bgk_kernel(double d, double l) {
  if (d >= l || d < 0) return 0.0;
  const double two_pi = 2 * std::numbers::pi;
  const double r = d / l;
  return (2 + std::cos(two_pi * r)) * (1 - r) / 3 + std::sin(two_pi * r) / two_pi;
}

void infer_occluded(TraversabilityField& field) {
  field.classify();
  const auto& grid = field.grid();
  const double res = field.resolution();
  const double l = 3 * res;
  const int reach = 3;

  struct Offset {
    int dx, dy;
    double k;
  };
  std::vector<Offset> offsets;
  for (int dy = -reach; dy <= reach; ++dy)
    for (int dx = -reach; dx <= reach; ++dx) {
      const double k = bgk_kernel(std::hypot(dx, dy) * res, l);
      if ((dx != 0 || dy != 0) && k > 0) offsets.push_back({dx, dy, k});
    }

  DenseGrid<double> num(grid.origin(), grid.width(), grid.height(), 0.0);
  DenseGrid<double> den(grid.origin(), grid.width(), grid.height(), 0.0);
  DenseGrid<double> hnum(grid.origin(), grid.width(), grid.height(), 0.0);
  DenseGrid<double> hden(grid.origin(), grid.width(), grid.height(), 0.0);
  for (std::size_t i = 0; i < grid.data().size(); ++i) {
    const auto& fc = grid.at(i);
    if (fc.state != CellState::Observed) continue;
    const Cell c = grid.cell(i);
    const double y = fc.traversable ? 1.0 : 0.0;
    for (const auto& o : offsets) {
      const Cell n{c.x + o.dx, c.y + o.dy};
      if (!grid.contains(n) || grid[n].state == CellState::Observed) continue;
      num[n] += o.k * y;
      den[n] += o.k;
      if (!fc.obstacle) {
        hnum[n] += o.k * fc.height;
        hden[n] += o.k;
      }
    }
  }
  for (std::size_t i = 0; i < grid.data().size(); ++i) {
    if (den.at(i) <= 0) continue;
    const Cell c = grid.cell(i);
    field.set_inferred(c, num.at(i) / den.at(i), hden.at(i) > 0 ? hnum.at(i) / hden.at(i) : 0.0);
  }
  field.classify();
}

CellSet TraversableGraph::cell_set() const {
  std::vector<Cell> cells;
  cells.reserve(nodes.size());
  for (const auto& n : nodes) cells.push_back(n.cell);
  return CellSet(std::move(cells));
}

namespace {

std::optional<Cell> nearest_traversable(const TraversabilityField& field, const Cell& from) {
  const auto& grid = field.grid();
  std::optional<Cell> best;
  long best_d2 = 0;
  for (std::size_t i = 0; i < grid.data().size(); ++i) {
    if (!grid.at(i).traversable) continue;
    const Cell c = grid.cell(i);
    const long d2 = long(c.x - from.x) * (c.x - from.x) + long(c.y - from.y) * (c.y - from.y);
    if (!best || d2 < best_d2) {
      best = c;
      best_d2 = d2;
    }
  }
  return best;
}

}  // namespace

TraversableGraph build_traversable_graph(const TraversabilityField& field, const Pose2& robot_pose) {
  const Cell root = cell_of(robot_pose.t, field.resolution());
  if (!field.is_traversable(root)) {
    auto nearest = nearest_traversable(field, root);
    std::string msg = "robot cell (" + std::to_string(root.x) + ", " + std::to_string(root.y) + ") is not traversable";
    if (nearest) msg += "; nearest traversable cell (" + std::to_string(nearest->x) + ", " + std::to_string(nearest->y) + ")";
    throw NotTraversableError(msg, nearest);
  }
  const double max_step = field.robot().max_step;
  return flood_graph(
      field, root, [&](const Cell& c) { return field.at(c).traversable; },
      [&](const Cell& a, const Cell& b) {
        const auto &fa = field.at(a), &fb = field.at(b);
        return fa.traversable && fb.traversable && std::abs(fa.height - fb.height) <= max_step;
      });
}

TraversableGraph build_free_space_graph(const TraversabilityField& field, const Pose2& robot_pose) {
  const Cell root = cell_of(robot_pose.t, field.resolution());
  auto free = [&](const Cell& c) {
    const auto& fc = field.at(c);
    return fc.swept && !(fc.state == CellState::Observed && fc.obstacle);
  };
  return flood_graph(field, root, free, [&](const Cell& a, const Cell& b) { return free(a) && free(b); });
}

void write_pgm(const TraversabilityField& field, std::ostream& out) {
  const auto& grid = field.grid();
  out << "P2\n" << grid.width() << ' ' << grid.height() << "\n255\n";
  for (int y = grid.height() - 1; y >= 0; --y) {
    for (int x = 0; x < grid.width(); ++x) {
      const auto& fc = grid[{grid.origin().x + x, grid.origin().y + y}];
      int v = 128;
      if (fc.state == CellState::Observed) v = fc.obstacle ? 0 : (fc.traversable ? 255 : 64);
      if (fc.state == CellState::Inferred) v = 96 + int(std::lround(fc.score * 100));
      out << v << (x + 1 < grid.width() ? ' ' : '\n');
    }
  }
}

nlohmann::json graph_to_json(const TraversableGraph& g) {
  nlohmann::json nodes = nlohmann::json::array(), edges = nlohmann::json::array();
  for (const auto& n : g.nodes)
    nodes.push_back({{"cell", {n.cell.x, n.cell.y}}, {"position", {n.position.x(), n.position.y()}}, {"score", n.score}});
  for (const auto& [a, b] : g.edges) edges.push_back({a, b});
  return {{"resolution", g.resolution}, {"nodes", nodes}, {"edges", edges}};
}

}  // namespace tacs
