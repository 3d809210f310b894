#include "tacs/walls.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace tacs {

std::string to_string(WallCategory c) {
  switch (c) {
    case WallCategory::XPlus: return "x+";
    case WallCategory::XMinus: return "x-";
    case WallCategory::YPlus: return "y+";
    case WallCategory::YMinus: return "y-";
  }
  return "?";
}

WallCategory wall_category_from_string(const std::string& s) {
  for (auto c : {WallCategory::XPlus, WallCategory::XMinus, WallCategory::YPlus, WallCategory::YMinus})
    if (to_string(c) == s) return c;
  throw std::invalid_argument("unknown wall category '" + s + "'");
}

std::pair<double, double> Plane::span() const {
  const Vec2d t = tangent();
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : inliers) {
    const double s = t.dot(p);
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  return {lo, hi};
}

Line2<double> fit_line(std::span<const Vec2d> points) {
  Vec2d c = Vec2d::Zero();
  for (const auto& p : points) c += p;
  c /= double(points.size());
  Mat2d cov = Mat2d::Zero();
  for (const auto& p : points) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat2d> es(cov);
  const Vec2d n = es.eigenvectors().col(0);  // smallest eigenvalue
  return {std::atan2(n.y(), n.x()), n.dot(c)};
}

namespace {

Line2<double> oriented(Line2<double> l, const Vec2d& observer) {
  if (l.signed_distance(observer) < 0) {
    l.phi = wrap_angle(l.phi + std::numbers::pi);
    l.d = -l.d;
  }
  return l;
}

std::vector<std::size_t> inliers_of(const Line2<double>& l, std::span<const Vec2d> pts,
                                    const std::vector<std::size_t>& pool, double dist) {
  std::vector<std::size_t> out;
  for (auto i : pool)
    if (std::abs(l.signed_distance(pts[i])) <= dist) out.push_back(i);
  return out;
}

/// Keeps the longest run of inliers whose consecutive tangent gaps stay below max_gap.
std::vector<std::size_t> longest_run(const Line2<double>& l, std::span<const Vec2d> pts, std::vector<std::size_t> idx,
                                     double max_gap) {
  if (idx.empty()) return idx;
  const Vec2d t(-std::sin(l.phi), std::cos(l.phi));
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return t.dot(pts[a]) < t.dot(pts[b]); });
  std::size_t best_begin = 0, best_len = 1, begin = 0;
  for (std::size_t k = 1; k <= idx.size(); ++k) {
    if (k == idx.size() || t.dot(pts[idx[k]]) - t.dot(pts[idx[k - 1]]) > max_gap) {
      if (k - begin > best_len) {
        best_len = k - begin;
        best_begin = begin;
      }
      begin = k;
    }
  }
  std::vector<std::size_t> out(idx.begin() + best_begin, idx.begin() + best_begin + best_len);
  std::sort(out.begin(), out.end());
  return out;
}

double span_length(const Line2<double>& l, std::span<const Vec2d> pts, const std::vector<std::size_t>& idx) {
  const Vec2d t(-std::sin(l.phi), std::cos(l.phi));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto i : idx) {
    lo = std::min(lo, t.dot(pts[i]));
    hi = std::max(hi, t.dot(pts[i]));
  }
  return idx.empty() ? 0.0 : hi - lo;
}

}  // namespace

std::vector<Plane> extract_walls(std::span<const Vec2d> points, const RansacParams& params, Frame frame,
                                 const Vec2d& observer) {
  std::vector<Plane> planes;
  std::vector<std::size_t> pool(points.size());
  std::iota(pool.begin(), pool.end(), 0);
  std::mt19937_64 rng(params.seed);

  while (int(planes.size()) < params.max_planes && int(pool.size()) >= params.min_inliers) {
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<std::size_t> best;
    for (int it = 0; it < params.iterations; ++it) {
      const Vec2d& a = points[pool[pick(rng)]];
      const Vec2d& b = points[pool[pick(rng)]];
      const Vec2d dir = b - a;
      if (dir.norm() < 1e-6) continue;
      const Vec2d n = Vec2d(-dir.y(), dir.x()).normalized();
      const Line2<double> l{std::atan2(n.y(), n.x()), n.dot(a)};
      auto in = inliers_of(l, points, pool, params.inlier_dist);
      if (in.size() > best.size()) best = std::move(in);
    }
    if (int(best.size()) < params.min_inliers) break;

    // refine, then recollect against the refined line
    std::vector<Vec2d> sel;
    for (auto i : best) sel.push_back(points[i]);
    Line2<double> line = fit_line(sel);
    auto in = longest_run(line, points, inliers_of(line, points, pool, params.inlier_dist), params.max_gap);
    if (int(in.size()) >= params.min_inliers) {
      sel.clear();
      for (auto i : in) sel.push_back(points[i]);
      line = fit_line(sel);
      in = longest_run(line, points, inliers_of(line, points, pool, params.inlier_dist), params.max_gap);
    }
    const bool accepted = int(in.size()) >= params.min_inliers && span_length(line, points, in) >= params.min_length;
    if (!accepted) {
      // Remove the best consensus set anyway so the next round can look elsewhere;
      // stop once nothing structured is left.
      if (in.empty()) break;
      std::vector<std::size_t> rest;
      std::set_difference(pool.begin(), pool.end(), in.begin(), in.end(), std::back_inserter(rest));
      if (rest.size() == pool.size()) break;
      pool = std::move(rest);
      continue;
    }

    line = oriented(line, observer);
    Plane p;
    p.frame = frame;
    p.normal = line.normal();
    p.d = line.d;
    for (auto i : in) p.inliers.push_back(points[i]);
    planes.push_back(std::move(p));

    std::vector<std::size_t> rest;
    std::set_difference(pool.begin(), pool.end(), in.begin(), in.end(), std::back_inserter(rest));
    pool = std::move(rest);
  }
  return planes;
}

WallCategory classify_wall(const Vec2d& map_normal, const Vec2d& sign_reference) {
  if (std::abs(map_normal.x()) >= std::abs(map_normal.y()))
    return sign_reference.x() >= 0 ? WallCategory::XPlus : WallCategory::XMinus;
  return sign_reference.y() >= 0 ? WallCategory::YPlus : WallCategory::YMinus;
}

Plane transform_plane(const Plane& body, const Pose2& pose) {
  Plane out = body;
  const auto l = transform_line(body.line(), pose);
  out.frame = Frame::Map;
  out.normal = l.normal();
  out.d = l.d;
  for (auto& p : out.inliers) p = pose * p;
  return out;
}

Plane inverse_transform_plane(const Plane& map, const Pose2& pose) {
  Plane out = map;
  const auto l = inverse_transform_line(map.line(), pose);
  out.frame = Frame::Body;
  out.normal = l.normal();
  out.d = l.d;
  const Pose2 inv = pose.inverse();
  for (auto& p : out.inliers) p = inv * p;
  return out;
}

std::optional<int> associate_wall(const Plane& map_plane, std::span<const WallView> existing, double angle_tol,
                                  double offset_tol, double span_slack) {
  std::optional<int> best;
  double best_angle = std::numeric_limits<double>::infinity();
  const double phi = map_plane.phi();
  for (const auto& w : existing) {
    const double dphi = std::abs(wrap_angle(phi - w.line.phi));
    if (dphi > angle_tol) continue;
    if (std::abs(map_plane.d - w.line.d) > offset_tol) continue;
    const Vec2d t(-std::sin(w.line.phi), std::cos(w.line.phi));
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : map_plane.inliers) {
      lo = std::min(lo, t.dot(p));
      hi = std::max(hi, t.dot(p));
    }
    if (!map_plane.inliers.empty() && (hi < w.span.first - span_slack || lo > w.span.second + span_slack)) continue;
    if (dphi < best_angle) {
      best_angle = dphi;
      best = w.id;
    }
  }
  return best;
}

}  // namespace tacs
