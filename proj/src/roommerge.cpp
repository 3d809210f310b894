#include "tacs/roommerge.hpp"

#include <algorithm>
#include <cmath>

namespace tacs {

double overlap_ratio(const CellSet& a, const CellSet& b) {
  const std::size_t m = std::min(a.size(), b.size());
  return m == 0 ? 0.0 : double(a.intersection_size(b)) / double(m);
}

bool merge_axes(RoomType a, RoomType b, bool& use_x, bool& use_y) {
  use_x = constrains_x(a) && constrains_x(b);
  use_y = constrains_y(a) && constrains_y(b);
  return use_x || use_y;
}

namespace {

double axis_gap(const Vec2d& a, const Vec2d& b, bool use_x, bool use_y) {
  const double dx = use_x ? a.x() - b.x() : 0.0;
  const double dy = use_y ? a.y() - b.y() : 0.0;
  return std::hypot(dx, dy);
}

}  // namespace

std::vector<MergeCandidate> find_merge_candidates(std::span<const RoomNode> rooms, const RoomNode& incoming,
                                                  double overlap_min) {
  std::vector<MergeCandidate> out;
  for (const auto& r : rooms) {
    if (r.id == incoming.id) continue;
    MergeCandidate c;
    if (!merge_axes(r.type, incoming.type, c.use_x, c.use_y)) continue;
    c.overlap_ratio = overlap_ratio(r.cells, incoming.cells);
    if (c.overlap_ratio <= 0 || c.overlap_ratio < overlap_min) continue;
    c.existing = r.id;
    c.incoming = incoming.id;
    c.center_gap = axis_gap(r.center, incoming.center, c.use_x, c.use_y);
    out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.overlap_ratio > b.overlap_ratio; });
  return out;
}

std::vector<MergeCandidate> find_center_distance_candidates(std::span<const RoomNode> rooms, const RoomNode& incoming,
                                                            double max_distance) {
  std::vector<MergeCandidate> out;
  for (const auto& r : rooms) {
    if (r.id == incoming.id) continue;
    MergeCandidate c;
    if (!merge_axes(r.type, incoming.type, c.use_x, c.use_y)) continue;
    const double d = (r.center - incoming.center).norm();
    if (d > max_distance) continue;
    c.existing = r.id;
    c.incoming = incoming.id;
    c.overlap_ratio = overlap_ratio(r.cells, incoming.cells);
    c.center_gap = d;
    out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.center_gap < b.center_gap; });
  return out;
}

std::optional<MergeFactorSet> build_merge_factor(const FactorGraph& graph, const MergeCandidate& candidate,
                                                 const RoomVars& existing, const RoomVars& incoming,
                                                 double parallel_tol, std::string* reason, double center_information,
                                                 double wall_information) {
  auto fail = [&](std::string why) -> std::optional<MergeFactorSet> {
    if (reason) *reason = std::move(why);
    return std::nullopt;
  };
  MergeFactorSet set;
  set.center.incoming = incoming.center;
  set.center.existing = existing.center;
  set.center.use_x = candidate.use_x;
  set.center.use_y = candidate.use_y;
  set.center.information = center_information;
  for (int axis = 0; axis < 2; ++axis) {
    if ((axis == 0 && !candidate.use_x) || (axis == 1 && !candidate.use_y)) continue;
    for (int k = 2 * axis; k < 2 * axis + 2; ++k) {
      const int wi = incoming.walls[k], we = existing.walls[k];
      if (wi < 0 || we < 0) return fail("room lacks a wall on a compared axis");
      set.center.incoming_walls[k] = wi;
      if (wi == we) continue;
      const double dphi = wrap_angle(as_line(graph.variable(wi)).phi - as_line(graph.variable(we)).phi);
      if (std::abs(dphi) > parallel_tol) return fail("matched walls are not parallel within tolerance");
      MergeWallFactor mw;
      mw.incoming = wi;
      mw.existing = we;
      mw.information = Mat2d::Identity() * wall_information;
      set.walls.push_back(mw);
    }
  }
  return set;
}

double merge_residual(const FactorGraph& graph, const MergeFactorSet& factors) {
  return graph.residual(factors.center).norm();
}

}  // namespace tacs
