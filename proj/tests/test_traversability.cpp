#include <doctest.h>

#include <deque>
#include <random>
#include <set>

#include "tacs/traversability.hpp"

using namespace tacs;

namespace {

Scan one_beam(double angle, double range, double max_range = 10.0, double edge_range = -1.0, double edge_dh = 0.0) {
  Scan s;
  s.max_range = max_range;
  s.beams.push_back({angle, range, edge_range, edge_dh});
  return s;
}

TraversabilityField flat(int w, int h) {
  TraversabilityField f({0, 0}, w, h, 0.1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) f.observe_ground({x, y}, 0.0);
  f.classify();
  return f;
}

bool same_cell(const FieldCell& a, const FieldCell& b) {
  return a.state == b.state && a.obstacle == b.obstacle && a.traversable == b.traversable && a.swept == b.swept &&
         a.height == b.height && a.score == b.score;
}

std::set<Cell> node_cells(const TraversableGraph& g) {
  std::set<Cell> s;
  for (const auto& n : g.nodes) s.insert(n.cell);
  return s;
}

}  // namespace

TEST_CASE("beam to a wall marks ground along the ray and the wall cell") {
  TraversabilityField f({-5, -5}, 40, 10, 0.1);
  update_field(f, one_beam(0.0, 2.0), Pose2(0.05, 0.05, 0.0));
  for (int x = 0; x < 20; ++x) {
    CHECK(f.at({x, 0}).state == CellState::Observed);
    CHECK_FALSE(f.at({x, 0}).obstacle);
  }
  CHECK(f.at({20, 0}).obstacle);
  CHECK(f.at({21, 0}).state == CellState::Unknown);
  CHECK(f.at({0, 1}).state == CellState::Unknown);
}

TEST_CASE("beam over a drop edge leaves the far side unknown") {
  TraversabilityField f({-5, -5}, 150, 10, 0.1);
  const double edge = 3.03;
  update_field(f, one_beam(0.0, 10.0, 10.0, edge, -3.0), Pose2(0.05, 0.05, 0.0));
  // cells whose midpoint precedes the edge are ground at floor height; the
  // first cell past the edge carries the drop height
  const int edge_cell = int(std::floor((0.05 + edge + 0.025) / 0.1));
  for (int x = 0; x < 100; ++x) {  // the ray ends at 10 m
    const auto& c = f.at({x, 0});
    const double mid = (x + 0.5) * 0.1 - 0.05;
    if (mid < edge) {
      CHECK(c.state == CellState::Observed);
      CHECK(c.height == 0.0);
    } else if (x == edge_cell) {
      CHECK(c.state == CellState::Observed);
      CHECK(c.height == -3.0);
    } else {
      CHECK(c.state == CellState::Unknown);
      CHECK(c.swept);
    }
  }
}

TEST_CASE("repeating a scan is a fixed point") {
  Scan s;
  s.max_range = 10.0;
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> r(0.5, 4.0);
  for (int i = 0; i < 90; ++i) s.beams.push_back({i * 2 * std::numbers::pi / 90, r(rng)});
  TraversabilityField f = TraversabilityField::around({0, 0}, 6.0, 0.1);
  update_field(f, s, Pose2());
  f.classify();
  const auto once = f.grid().data();
  update_field(f, s, Pose2());
  f.classify();
  const auto& twice = f.grid().data();
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(same_cell(once[i], twice[i]));
}

TEST_CASE("kernel shape") {
  CHECK(bgk_kernel(0.0, 0.3) == doctest::Approx(1.0));
  CHECK(bgk_kernel(0.3, 0.3) == 0.0);
  CHECK(bgk_kernel(0.5, 0.3) == 0.0);
  double prev = 1.0;
  for (int i = 1; i < 30; ++i) {
    const double k = bgk_kernel(0.01 * i, 0.3);
    CHECK(k < prev);
    CHECK(k > 0.0);
    prev = k;
  }
}

TEST_CASE("inference between one traversable and one blocked cell is even") {
  TraversabilityField f({0, 0}, 3, 1, 0.1);
  f.observe_ground({0, 0}, 0.0);
  f.observe_obstacle({2, 0});
  infer_occluded(f);
  CHECK(f.at({1, 0}).state == CellState::Inferred);
  CHECK(f.at({1, 0}).score == doctest::Approx(0.5));
}

TEST_CASE("inference among traversable cells is certain") {
  TraversabilityField f({0, 0}, 5, 5, 0.1);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x)
      if (x != 2 || y != 2) f.observe_ground({x, y}, 0.0);
  infer_occluded(f);
  CHECK(f.at({2, 2}).state == CellState::Inferred);
  CHECK(f.at({2, 2}).score == doctest::Approx(1.0));
  CHECK(f.is_traversable({2, 2}));
}

TEST_CASE("inferred scores equal the direct kernel sum") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    TraversabilityField f({0, 0}, 20, 20, 0.1);
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) {
        const double p = u(rng);
        if (p < 0.15)
          f.observe_obstacle({x, y});
        else if (p < 0.6)
          f.observe_ground({x, y}, u(rng) < 0.2 ? 0.3 : 0.0);
      }
    TraversabilityField labels = f;
    labels.classify();
    infer_occluded(f);
    const double l = 0.3;
    for (int y = 0; y < 20; ++y)
      for (int x = 0; x < 20; ++x) {
        if (labels.at({x, y}).state == CellState::Observed) continue;
        double num = 0, den = 0;
        for (int yy = 0; yy < 20; ++yy)
          for (int xx = 0; xx < 20; ++xx) {
            const auto& o = labels.at({xx, yy});
            if (o.state != CellState::Observed) continue;
            const double k = bgk_kernel(std::hypot(xx - x, yy - y) * 0.1, l);
            num += k * (o.traversable ? 1.0 : 0.0);
            den += k;
          }
        const auto& c = f.at({x, y});
        if (den > 0) {
          CHECK(c.state == CellState::Inferred);
          CHECK(c.score == doctest::Approx(num / den).epsilon(1e-12));
        } else {
          CHECK(c.state == CellState::Unknown);
        }
      }
  }
}

TEST_CASE("flat field graph covers every cell") {
  const auto f = flat(10, 10);
  const auto g = build_traversable_graph(f, Pose2(0.55, 0.55, 0));
  CHECK(g.nodes.size() == 100);
  CHECK(g.nodes[0].cell == Cell{5, 5});
  // 8-connectivity: 2 * 9 * 10 straight plus 2 * 9 * 9 diagonal edges
  CHECK(g.edges.size() == 2 * 90 + 2 * 81);
}

TEST_CASE("a wall row splits the graph") {
  TraversabilityField f({0, 0}, 10, 10, 0.1);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      if (x == 5)
        f.observe_obstacle({x, y});
      else
        f.observe_ground({x, y}, 0.0);
    }
  f.classify();
  const auto g = build_traversable_graph(f, Pose2(0.15, 0.45, 0));
  CHECK(g.nodes.size() == 50);
  for (const auto& n : g.nodes) CHECK(n.cell.x < 5);
}

TEST_CASE("graph equals a step-limited flood fill on terraced terrain") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> level(0, 3);
  for (int trial = 0; trial < 20; ++trial) {
    TraversabilityField f({0, 0}, 24, 24, 0.1);
    // 6x6 blocks at heights 0, 0.1, 0.3, -3 (a drop)
    std::vector<double> heights{0.0, 0.1, 0.3, -3.0};
    std::vector<int> block(16);
    for (auto& b : block) b = level(rng);
    block[0] = 0;
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x) f.observe_ground({x, y}, heights[block[(y / 6) * 4 + x / 6]]);
    f.classify();

    const Cell root{1, 1};
    std::set<Cell> oracle;
    if (f.at(root).traversable) {
      std::deque<Cell> q{root};
      oracle.insert(root);
      while (!q.empty()) {
        const Cell c = q.front();
        q.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const Cell n{c.x + dx, c.y + dy};
            if ((dx == 0 && dy == 0) || !f.contains(n) || oracle.count(n) || !f.at(n).traversable) continue;
            if (std::abs(f.at(n).height - f.at(c).height) > f.robot().max_step) continue;
            oracle.insert(n);
            q.push_back(n);
          }
      }
      CHECK(node_cells(build_traversable_graph(f, Pose2(0.15, 0.15, 0))) == oracle);
    } else {
      CHECK_THROWS_AS(build_traversable_graph(f, Pose2(0.15, 0.15, 0)), NotTraversableError);
    }
  }
}

TEST_CASE("drop cells are free space but not traversable") {
  TraversabilityField f({0, 0}, 20, 10, 0.1);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 20; ++x) {
      f.observe_ground({x, y}, x < 10 ? 0.0 : -3.0);
      f.mark_swept({x, y});
    }
  f.classify();
  const auto trav = build_traversable_graph(f, Pose2(0.25, 0.45, 0));
  for (const auto& n : trav.nodes) CHECK(n.cell.x < 10);
  const auto free = build_free_space_graph(f, Pose2(0.25, 0.45, 0));
  CHECK(free.nodes.size() == 200);
}

TEST_CASE("robot off the traversable area") {
  TraversabilityField f({0, 0}, 10, 10, 0.1);
  f.observe_obstacle({0, 0});
  for (int x = 3; x < 6; ++x) f.observe_ground({x, 3}, 0.0);
  f.classify();
  try {
    build_traversable_graph(f, Pose2(0.05, 0.05, 0));
    FAIL("expected NotTraversableError");
  } catch (const NotTraversableError& e) {
    REQUIRE(e.nearest.has_value());
    CHECK(*e.nearest == Cell{3, 3});
  }
}

TEST_CASE("step and slope limits") {
  TraversabilityField f({0, 0}, 3, 1, 0.1);
  f.observe_ground({0, 0}, 0.0);
  f.observe_ground({1, 0}, 0.05);
  f.observe_ground({2, 0}, 0.5);
  f.classify();
  // 0.05 over 0.1 m is a 27 degree slope; the 0.45 step beyond breaks cell 1
  CHECK_FALSE(f.at({1, 0}).traversable);
  CHECK_FALSE(f.at({2, 0}).traversable);
  TraversabilityField g({0, 0}, 3, 1, 0.1);
  g.observe_ground({0, 0}, 0.0);
  g.observe_ground({1, 0}, 0.03);
  g.observe_ground({2, 0}, 0.06);
  g.classify();
  CHECK(g.at({1, 0}).traversable);
}
