#include <doctest.h>

#include <random>
#include <sstream>

#include "tacs/metrics.hpp"

using namespace tacs;

namespace {

RegionMask box(int x0, int y0, int x1, int y1, double res = 0.1) {
  std::vector<Cell> cells;
  for (int x = x0; x < x1; ++x)
    for (int y = y0; y < y1; ++y) cells.push_back({x, y});
  return {CellSet(std::move(cells)), res};
}

std::vector<StampedPose> stamped(const std::vector<Vec2d>& xy) {
  std::vector<StampedPose> out;
  for (std::size_t i = 0; i < xy.size(); ++i) out.push_back({double(i), Pose2(xy[i], 0.0)});
  return out;
}

}  // namespace

TEST_CASE("dcs on identical, disjoint and half-shifted squares") {
  const auto a = box(0, 0, 10, 10);
  CHECK(dcs(a, a) == 1.0);
  CHECK(dcs(a, box(20, 0, 30, 10)) == 0.0);
  // unit squares at 0.1 m cells, the second shifted by half a side
  CHECK(dcs(a, box(5, 0, 15, 10)) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(dcs(RegionMask{}, RegionMask{}) == 0.0);
  CHECK_THROWS_AS(dcs(a, box(0, 0, 10, 10, 0.2)), MetricError);
}

TEST_CASE("dcs is symmetric and bounded on random masks") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> u(0, 30);
  for (int k = 0; k < 200; ++k) {
    const auto a = box(u(rng), u(rng), 30 + u(rng), 30 + u(rng));
    const auto b = box(u(rng), u(rng), 30 + u(rng), 30 + u(rng));
    const double ab = dcs(a, b);
    CHECK(ab == dcs(b, a));
    CHECK(ab >= 0.0);
    CHECK(ab <= 1.0);
  }
}

TEST_CASE("consistency statistics") {
  const std::vector<RegionMask> rooms{box(0, 0, 10, 10), box(20, 0, 30, 10)};
  SUBCASE("identical trials") {
    const std::vector<std::vector<RegionMask>> trials(3, rooms);
    const auto r = consistency(trials);
    CHECK(r.n_room == 2.0);
    CHECK(r.sigma_room == 0.0);
    CHECK(r.dcs_mean == 1.0);
  }
  SUBCASE("population deviation of counts 5, 7, 6") {
    std::vector<std::vector<RegionMask>> trials;
    for (int n : {5, 7, 6}) {
      std::vector<RegionMask> t;
      for (int i = 0; i < n; ++i) t.push_back(box(20 * i, 0, 20 * i + 10, 10));
      trials.push_back(t);
    }
    const auto r = consistency(trials);
    CHECK(r.n_room == doctest::Approx(6.0));
    CHECK(r.sigma_room == doctest::Approx(0.816).epsilon(1e-3));
    // unmatched rooms fill empty slots: (5/7 + 5/6 + 6/7) / 3
    CHECK(r.dcs_mean == doctest::Approx((5.0 / 7 + 5.0 / 6 + 6.0 / 7) / 3));
  }
  SUBCASE("one trial is not enough") {
    const std::vector<std::vector<RegionMask>> trials{rooms};
    CHECK_THROWS_AS(consistency(trials), MetricError);
  }
}

TEST_CASE("wate against the published rows") {
  const std::vector<double> dist{70.51, 152.25, 173.84, 269.62};
  CHECK(wate(std::vector<double>{0.16, 0.87, 0.35, 2.63}, dist) == doctest::Approx(1.37).epsilon(0.01 / 1.37));
  CHECK(wate(std::vector<double>{0.12, 5.38, 0.41, 2.55}, dist) == doctest::Approx(2.38).epsilon(0.01 / 2.38));
  CHECK(wate(std::vector<double>{0.4, 0.4, 0.4, 0.4}, dist) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK_THROWS_AS(wate(std::vector<double>{1.0}, dist), MetricError);
  CHECK_THROWS_AS(wate(std::vector<double>{1.0}, std::vector<double>{0.0}), MetricError);
}

TEST_CASE("wate stays within the range of its inputs") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> a(0.0, 5.0), d(1.0, 300.0);
  for (int k = 0; k < 100; ++k) {
    std::vector<double> ates(5), dists(5);
    for (int i = 0; i < 5; ++i) ates[i] = a(rng), dists[i] = d(rng);
    const double w = wate(ates, dists);
    CHECK(w >= *std::min_element(ates.begin(), ates.end()) - 1e-12);
    CHECK(w <= *std::max_element(ates.begin(), ates.end()) + 1e-12);
  }
}

TEST_CASE("ate removes any rigid transform") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-10.0, 10.0);
  std::vector<Vec2d> truth, est;
  for (int i = 0; i < 40; ++i) {
    truth.push_back({u(rng), u(rng)});
    est.push_back(truth.back() + Vec2d(0.05 * u(rng), 0.05 * u(rng)));
  }
  CHECK(ate(stamped(truth), stamped(truth)) <= 1e-12);
  const double base = ate(stamped(est), stamped(truth));
  for (int k = 0; k < 100; ++k) {
    const Pose2 T(u(rng), u(rng), u(rng));
    std::vector<Vec2d> moved;
    for (const auto& p : est) moved.push_back(T * p);
    CHECK(std::abs(ate(stamped(moved), stamped(truth)) - base) <= 1e-9);
  }
}

TEST_CASE("ate of a bent line matches the closed form") {
  // Truth on the x axis; the estimate lifts the middle pose by h. The optimal
  // alignment is a shift by h/5 in y (no rotation by symmetry), leaving
  // residuals h/5 on four poses and 4h/5 on one.
  const double h = 0.3;
  const std::vector<Vec2d> truth{{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}};
  auto est = truth;
  est[2].y() = h;
  const double expected = std::sqrt((4 * std::pow(h / 5, 2) + std::pow(4 * h / 5, 2)) / 5);
  CHECK(ate(stamped(est), stamped(truth)) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ate needs associated poses") {
  const std::vector<Vec2d> xy{{0, 0}, {1, 0}};
  auto late = stamped(xy);
  for (auto& p : late) p.t += 10.0;
  CHECK_THROWS_AS(ate(stamped(xy), late), MetricError);
}

TEST_CASE("loop precision") {
  const std::vector<Vec2d> truth{{0, 0}, {0.5, 0}, {5, 0}, {0, 0.2}, {9, 9}};
  auto loop = [](int a, int b) {
    LoopEvent e;
    e.kf_old = a;
    e.kf_new = b;
    return e;
  };
  std::vector<LoopEvent> events{loop(0, 1), loop(0, 3), loop(0, 2), loop(1, 4)};
  auto p = loop_precision(events, truth, 1.0);
  CHECK(p.value == 0.5);
  CHECK_FALSE(p.zero_support);
  events.resize(2);
  CHECK(loop_precision(events, truth, 1.0).value == 1.0);
  p = loop_precision({}, truth, 1.0);
  CHECK(p.value == 1.0);
  CHECK(p.zero_support);
  CHECK_THROWS_AS(loop_precision(std::vector<LoopEvent>{loop(0, 7)}, truth, 1.0), MetricError);
}

TEST_CASE("tum round trip keeps planar poses") {
  const std::vector<StampedPose> poses{{0.0, Pose2(1, 2, 0.3)}, {0.5, Pose2(-1, 0.25, -2.9)}};
  std::stringstream ss;
  write_tum(poses, ss);
  const auto back = read_tum(ss);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].t == doctest::Approx(poses[i].t));
    CHECK(back[i].pose.x() == doctest::Approx(poses[i].pose.x()));
    CHECK(back[i].pose.y() == doctest::Approx(poses[i].pose.y()));
    CHECK(back[i].pose.theta == doctest::Approx(poses[i].pose.theta));
  }
  std::stringstream bad("0 1 2\n");
  CHECK_THROWS_AS(read_tum(bad), MetricError);
}
