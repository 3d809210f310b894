#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tacs/geometry.hpp"

namespace tacs {

enum class Frame { Body, Map };

enum class WallCategory : std::uint8_t { XPlus = 0, XMinus = 1, YPlus = 2, YMinus = 3 };

std::string to_string(WallCategory c);
WallCategory wall_category_from_string(const std::string& s);

/// Straight wall n . p = d, normal facing the observer.
struct Plane {
  Frame frame = Frame::Body;
  Vec2d normal = Vec2d::UnitX();
  double d = 0.0;
  std::vector<Vec2d> inliers;
  int first_seen = -1;

  double phi() const { return std::atan2(normal.y(), normal.x()); }
  Line2<double> line() const { return {phi(), d}; }
  Vec2d tangent() const { return {-normal.y(), normal.x()}; }
  /// [min, max] of the inliers projected on the tangent.
  std::pair<double, double> span() const;
};

struct RansacParams {
  double inlier_dist = 0.05;
  int min_inliers = 30;
  double min_length = 1.0;
  int iterations = 200;
  int max_planes = 12;
  /// Inlier runs separated by more than this along the line are treated as separate walls.
  double max_gap = 1.0;
  std::uint64_t seed = 0;
};

/// Sequential RANSAC line extraction. Normals are oriented toward `observer`.
std::vector<Plane> extract_walls(std::span<const Vec2d> points, const RansacParams& params, Frame frame = Frame::Body,
                                 const Vec2d& observer = Vec2d::Zero());

/// Axis from the dominant component of `map_normal` (ties go to x); sign from
/// the same component of `sign_reference`.
WallCategory classify_wall(const Vec2d& map_normal, const Vec2d& sign_reference);
inline WallCategory classify_wall(const Plane& map_plane) { return classify_wall(map_plane.normal, map_plane.normal); }

Plane transform_plane(const Plane& body, const Pose2& pose);
Plane inverse_transform_plane(const Plane& map, const Pose2& pose);

/// What association needs to know about a registered wall.
struct WallView {
  int id = -1;
  Line2<double> line;
  std::pair<double, double> span{0.0, 0.0};  // along (-sin phi, cos phi)
};

std::optional<int> associate_wall(const Plane& map_plane, std::span<const WallView> existing, double angle_tol,
                                  double offset_tol, double span_slack = 0.5);

/// Least-squares line through `points` (at least two).
Line2<double> fit_line(std::span<const Vec2d> points);

}  // namespace tacs
