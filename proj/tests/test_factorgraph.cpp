#include <doctest.h>

#include <random>
#include <sstream>

#include "factor_fixtures.hpp"
#include "tacs/factorgraph.hpp"

using namespace tacs;
using tacs::testing::random_factor;

TEST_CASE("analytic jacobians match central differences") {
  std::mt19937_64 rng(20240611);
  const double h = 1e-6;
  for (int kind = 0; kind < 6; ++kind) {
    for (int trial = 0; trial < 100; ++trial) {
      FactorGraph g;
      const Factor f = random_factor(g, kind, rng);
      const auto lin = g.linearize(f);
      const auto vars = factor_variables(f);
      REQUIRE(lin.jacobians.size() == vars.size());
      for (std::size_t k = 0; k < vars.size(); ++k) {
        Variable& v = g.variable(vars[k]);
        REQUIRE(lin.jacobians[k].cols() == v.dim());
        REQUIRE(lin.jacobians[k].rows() == lin.residual.size());
        for (int c = 0; c < v.dim(); ++c) {
          const double x0 = v.value(c);
          v.value(c) = x0 + h;
          const Eigen::VectorXd rp = g.residual(f);
          v.value(c) = x0 - h;
          const Eigen::VectorXd rm = g.residual(f);
          v.value(c) = x0;
          const Eigen::VectorXd fd = (rp - rm) / (2 * h);
          for (int r = 0; r < fd.size(); ++r) {
            const double a = lin.jacobians[k](r, c);
            INFO(factor_kind(f), " var ", k, " col ", c, " row ", r);
            CHECK(std::abs(a - fd(r)) <= 1e-5 * std::max(1.0, std::abs(a)));
          }
        }
      }
    }
  }
}

TEST_CASE("residuals vanish at their measurements") {
  FactorGraph g;
  const int a = g.add_variable(pose_variable(Pose2(1, 2, 0.4)));
  const int b = g.add_variable(pose_variable(Pose2(-1, 3, 2.9)));
  const Pose2 m = as_pose(g.variable(a)).between(as_pose(g.variable(b)));
  CHECK(g.residual(OdometryFactor{a, b, m}).norm() <= 1e-12);

  const int p = g.add_variable(pose_variable(Pose2()));
  const int w = g.add_variable(wall_variable({0.3, 2.0}));
  CHECK(g.residual(PosePlaneFactor{p, w, {0.3, 2.0}}).norm() <= 1e-12);

  // walls x = 0 (normal +x) and x = 4 (normal -x): midpoint 2
  const int plus = g.add_variable(wall_variable({0.0, 0.0}));
  const int minus = g.add_variable(wall_variable({std::numbers::pi, -4.0}));
  const int c = g.add_variable(room_variable({2.0, 7.0}));
  CHECK(g.residual(RoomWallFactor{c, plus, minus, 0}).norm() <= 1e-12);
}

TEST_CASE("zero-noise odometry chain is recovered exactly") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> step(0.5, 1.5), turn(-0.6, 0.6), wrong(-0.5, 0.5);
  std::vector<Pose2> truth{Pose2()};
  for (int i = 1; i < 10; ++i) truth.push_back(truth.back() * Pose2(step(rng), 0.1 * wrong(rng), turn(rng)));
  FactorGraph g;
  std::vector<int> ids;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    Pose2 init = truth[i];
    if (i > 0) init = Pose2(init.x() + wrong(rng), init.y() + wrong(rng), init.theta + wrong(rng));
    ids.push_back(g.add_variable(pose_variable(init, i == 0)));
  }
  for (std::size_t i = 1; i < truth.size(); ++i)
    g.add_factor(OdometryFactor{ids[i - 1], ids[i], truth[i - 1].between(truth[i])});
  const auto stats = g.optimize();
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const Pose2 e = as_pose(g.variable(ids[i]));
    CHECK((e.t - truth[i].t).norm() <= 1e-9);
    CHECK(std::abs(wrap_angle(e.theta - truth[i].theta)) <= 1e-9);
  }
  for (std::size_t i = 1; i < stats.accepted_costs.size(); ++i)
    CHECK(stats.accepted_costs[i] <= stats.accepted_costs[i - 1]);
}

TEST_CASE("one loop factor removes most of a yaw drift around a square") {
  std::vector<Pose2> truth;
  for (int side = 0; side < 4; ++side)
    for (int k = 0; k < 10; ++k) truth.push_back(Pose2(0, 0, side * std::numbers::pi / 2) * Pose2(k - 5.0, -5.0, 0));
  // odometry whose yaw drifts by 0.05 rad over the loop
  const double drift = 0.05 / double(truth.size() - 1);
  FactorGraph g;
  std::vector<int> ids;
  Pose2 odom = truth[0];
  ids.push_back(g.add_variable(pose_variable(odom, true)));
  std::vector<Pose2> odom_poses{odom};
  for (std::size_t i = 1; i < truth.size(); ++i) {
    const Pose2 d = truth[i - 1].between(truth[i]);
    const Pose2 m(d.x(), d.y(), d.theta + drift);
    odom = odom * m;
    odom_poses.push_back(odom);
    ids.push_back(g.add_variable(pose_variable(odom)));
    g.add_factor(OdometryFactor{ids[i - 1], ids[i], m, Mat3d::Identity()});
  }
  g.add_factor(LoopClosureFactor{ids.front(), ids.back(), truth.front().between(truth.back()), Mat3d::Identity() * 100});
  auto rmse = [&](auto get) {
    double s = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) s += (get(i).t - truth[i].t).squaredNorm();
    return std::sqrt(s / truth.size());
  };
  const double before = rmse([&](std::size_t i) { return odom_poses[i]; });
  g.optimize();
  const double after = rmse([&](std::size_t i) { return as_pose(g.variable(ids[i])); });
  CHECK(before > 0.1);
  CHECK(after < 0.1 * before);
}

TEST_CASE("optimizing an optimal graph changes nothing") {
  FactorGraph g;
  const int a = g.add_variable(pose_variable(Pose2(), true));
  const int b = g.add_variable(pose_variable(Pose2(1, 0, 0.1)));
  g.add_factor(OdometryFactor{a, b, Pose2(1, 0, 0.1)});
  const double c0 = g.cost();
  const auto stats = g.optimize();
  CHECK(stats.iterations <= 1);
  CHECK(std::abs(g.cost() - c0) <= 1e-12);
}

TEST_CASE("variable bookkeeping") {
  FactorGraph g;
  const int a = g.add_variable(pose_variable(Pose2(), true));
  const int b = g.add_variable(pose_variable(Pose2(1, 0, 0)));
  const int f = g.add_factor(OdometryFactor{a, b, Pose2(1, 0, 0)});

  const std::size_t nv = g.variable_count();
  const int spare = g.add_variable(room_variable({0, 0}));
  g.remove_variable(spare);
  CHECK(g.variable_count() == nv);
  CHECK_FALSE(g.has_variable(spare));

  try {
    g.remove_variable(b);
    FAIL("expected GraphError");
  } catch (const GraphError& e) {
    CHECK(std::string(e.what()).find(std::to_string(f) + " (odometry)") != std::string::npos);
  }
  CHECK_THROWS_AS(g.add_factor(OdometryFactor{a, 99, Pose2()}), GraphError);
  Mat3d bad = Mat3d::Identity();
  bad(0, 0) = -1;
  CHECK_THROWS_AS(g.add_factor(OdometryFactor{a, b, Pose2(), bad}), GraphError);
  g.remove_factor(f);
  g.remove_variable(b);
  CHECK(g.variable_count() == 1);
}

TEST_CASE("huber applies to loop and merge factors only") {
  CHECK_FALSE(is_robust(OdometryFactor{}));
  CHECK_FALSE(is_robust(PosePlaneFactor{}));
  CHECK_FALSE(is_robust(RoomWallFactor{}));
  CHECK(is_robust(LoopClosureFactor{}));
  CHECK(is_robust(MergeCenterFactor{}));
  CHECK(is_robust(MergeWallFactor{}));

  // a 10 m loop outlier costs linearly, an odometry error quadratically
  FactorGraph g;
  const int a = g.add_variable(pose_variable(Pose2(), true));
  const int b = g.add_variable(pose_variable(Pose2(10, 0, 0), true));
  const int lf = g.add_factor(LoopClosureFactor{a, b, Pose2()});
  CHECK(g.cost(1.0) == doctest::Approx(2 * 10.0 - 1.0));
  g.remove_factor(lf);
  g.add_factor(OdometryFactor{a, b, Pose2()});
  CHECK(g.cost(1.0) == doctest::Approx(100.0));
}

TEST_CASE("g2o export lists every vertex and edge") {
  FactorGraph g;
  const int a = g.add_variable(pose_variable(Pose2(), true));
  const int b = g.add_variable(pose_variable(Pose2(1, 0, 0)));
  g.add_factor(OdometryFactor{a, b, Pose2(1, 0, 0)});
  std::stringstream ss;
  g.write_g2o(ss);
  const std::string s = ss.str();
  CHECK(s.find("VERTEX_SE2 0") != std::string::npos);
  CHECK(s.find("VERTEX_SE2 1") != std::string::npos);
  CHECK(s.find("EDGE_SE2 0 1") != std::string::npos);
}
