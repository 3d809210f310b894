#include <doctest.h>

#include <random>

#include "tacs/walls.hpp"

using namespace tacs;

namespace {

std::vector<Vec2d> segment(const Vec2d& a, const Vec2d& b, int n, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  const Vec2d dir = (b - a).normalized(), nrm(-dir.y(), dir.x());
  std::vector<Vec2d> out;
  for (int i = 0; i < n; ++i) out.push_back(a + (b - a) * (double(i) / (n - 1)) + nrm * (sigma > 0 ? noise(rng) : 0));
  return out;
}

double angle_to_axis(const Vec2d& n) {
  const double a = std::atan2(std::abs(n.y()), std::abs(n.x()));
  return std::min(a, std::numbers::pi / 2 - a);
}

}  // namespace

TEST_CASE("two perpendicular segments give two axis-aligned planes") {
  std::mt19937_64 rng(1);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto pts = segment({1, -2}, {1, 2}, 120, 0.01, rng);
    const auto more = segment({-3, 2.5}, {1, 2.5}, 120, 0.01, rng);
    pts.insert(pts.end(), more.begin(), more.end());
    RansacParams p;
    p.seed = seed;
    const auto planes = extract_walls(pts, p);
    REQUIRE(planes.size() == 2);
    for (const auto& pl : planes) {
      CHECK(angle_to_axis(pl.normal) <= deg2rad(2.0));
      CHECK(pl.line().signed_distance(Vec2d::Zero()) > 0);  // faces the observer
    }
  }
}

TEST_CASE("unstructured scatter rarely yields a plane") {
  int spurious = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    std::vector<Vec2d> pts(300);
    for (auto& p : pts) p = {u(rng), u(rng)};
    RansacParams params;
    params.seed = seed;
    spurious += int(extract_walls(pts, params).size());
  }
  CHECK(spurious <= 1);
}

TEST_CASE("collinear points give one exact plane") {
  std::mt19937_64 rng(0);
  const auto pts = segment({0, 1}, {3, 1}, 50, 0.0, rng);
  const auto planes = extract_walls(pts, RansacParams{});
  REQUIRE(planes.size() == 1);
  for (const auto& p : pts) CHECK(std::abs(planes[0].line().signed_distance(p)) <= 1e-12);
  CHECK(planes[0].inliers.size() == 50);
  const auto [lo, hi] = planes[0].span();
  CHECK(hi - lo == doctest::Approx(3.0));
}

TEST_CASE("a gap splits a line into separate walls") {
  std::mt19937_64 rng(0);
  auto pts = segment({0, 1}, {3, 1}, 60, 0.0, rng);
  const auto far = segment({6, 1}, {9, 1}, 60, 0.0, rng);
  pts.insert(pts.end(), far.begin(), far.end());
  CHECK(extract_walls(pts, RansacParams{}).size() == 2);
}

TEST_CASE("wall categories") {
  CHECK(classify_wall(Vec2d(1, 0), Vec2d(1, 0)) == WallCategory::XPlus);
  CHECK(classify_wall(Vec2d(-1, 0), Vec2d(-1, 0)) == WallCategory::XMinus);
  CHECK(classify_wall(Vec2d(0, 1), Vec2d(0, 1)) == WallCategory::YPlus);
  // sign from the body-frame normal at first sight
  CHECK(classify_wall(Vec2d(-0.1, -0.995), Vec2d(0.05, -0.99)) == WallCategory::YMinus);
  CHECK(classify_wall(Vec2d(0.7072, 0.7070), Vec2d(0.7072, 0.7070)) == WallCategory::XPlus);
  for (auto c : {WallCategory::XPlus, WallCategory::XMinus, WallCategory::YPlus, WallCategory::YMinus})
    CHECK(wall_category_from_string(to_string(c)) == c);
}

TEST_CASE("plane transforms") {
  Plane body;
  body.normal = {1, 0};
  body.d = 2.0;
  body.inliers = {{2, 0}, {2, 1}};
  const Plane same = transform_plane(body, Pose2());
  CHECK(same.normal.isApprox(body.normal));
  CHECK(same.d == doctest::Approx(2.0));
  CHECK(same.frame == Frame::Map);

  const Plane turned = transform_plane(body, Pose2(0, 0, std::numbers::pi / 2));
  CHECK(std::abs(turned.normal.x()) <= 1e-12);
  CHECK(turned.normal.y() == doctest::Approx(1.0));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  for (int k = 0; k < 100; ++k) {
    Plane p;
    const double phi = u(rng);
    p.normal = {std::cos(phi), std::sin(phi)};
    p.d = u(rng);
    p.inliers = {{u(rng), u(rng)}};
    const Pose2 pose(u(rng), u(rng), u(rng));
    const Plane back = inverse_transform_plane(transform_plane(p, pose), pose);
    CHECK((back.normal - p.normal).norm() <= 1e-9);
    CHECK(std::abs(back.d - p.d) <= 1e-9);
    CHECK((back.inliers[0] - p.inliers[0]).norm() <= 1e-9);
    // transformed inliers stay on the transformed line
    Plane q = p;
    q.inliers = {p.normal * p.d};
    const Plane m = transform_plane(q, pose);
    CHECK(std::abs(m.line().signed_distance(m.inliers[0])) <= 1e-9);
  }
}

TEST_CASE("wall association") {
  Plane seen;
  seen.normal = {1, 0};
  seen.d = 1.0;
  seen.inliers = {{1, 0}, {1, 2}};
  const std::vector<WallView> walls{{7, {0.0, 1.0}, {-1.0, 3.0}}, {8, {0.0, 3.0}, {-1.0, 3.0}}};
  CHECK(associate_wall(seen, walls, deg2rad(5.0), 0.3) == 7);

  Plane far = seen;
  far.d = 3.0 + 2.0;
  CHECK_FALSE(associate_wall(far, walls, deg2rad(5.0), 0.3));

  // 3 degrees and 0.1 m off: within (5 deg, 0.3 m) of wall 7 only
  Plane near;
  near.normal = {std::cos(deg2rad(3.0)), std::sin(deg2rad(3.0))};
  near.d = 1.1;
  near.inliers = {{1.1, 0}, {1.1, 1}};
  CHECK(associate_wall(near, walls, deg2rad(5.0), 0.3) == 7);
  for (const auto& w : walls) {
    const bool ok = std::abs(wrap_angle(near.phi() - w.line.phi)) <= deg2rad(5.0) && std::abs(near.d - w.line.d) <= 0.3;
    CHECK(ok == (w.id == 7));
  }

  // same line but a distant stretch of it: a different wall
  Plane elsewhere = seen;
  elsewhere.inliers = {{1, 10}, {1, 12}};
  CHECK_FALSE(associate_wall(elsewhere, walls, deg2rad(5.0), 0.3));
}
