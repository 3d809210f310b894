#include "tacs/worldsim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace tacs {

using nlohmann::json;

std::string to_string(Archetype a) {
  switch (a) {
    case Archetype::SingleRoom: return "single_room";
    case Archetype::Corridor: return "corridor";
    case Archetype::SquareLoop: return "square_loop";
    case Archetype::MultiRoom: return "multi_room";
    case Archetype::Mezzanine: return "mezzanine";
    case Archetype::LargeRoom: return "large_room";
  }
  return "unknown";
}

Archetype archetype_from_string(const std::string& s) {
  for (auto a : {Archetype::SingleRoom, Archetype::Corridor, Archetype::SquareLoop, Archetype::MultiRoom,
                 Archetype::Mezzanine, Archetype::LargeRoom}) {
    if (to_string(a) == s) return a;
  }
  throw WorldError("unknown archetype '" + s + "'");
}

namespace {

template <typename T>
void read_optional(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* what) {
  if (!j.is_object()) throw WorldError(std::string(what) + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* known) { return k == known; }))
      throw WorldError(std::string(what) + ": unknown key '" + k + "'");
  }
}

}  // namespace

void to_json(json& j, const WorldSpec& s) {
  j = json{{"archetype", to_string(s.archetype)},
           {"resolution", s.resolution},
           {"rooms", s.rooms},
           {"room_width", s.room_width},
           {"room_depth", s.room_depth},
           {"corridor_length", s.corridor_length},
           {"corridor_width", s.corridor_width},
           {"loop_side", s.loop_side},
           {"door_width", s.door_width},
           {"wall_thickness", s.wall_thickness},
           {"drop_depth", s.drop_depth},
           {"ledge_opening", s.ledge_opening},
           {"alcove_depth", s.alcove_depth},
           {"atrium_depth", s.atrium_depth},
           {"margin", s.margin},
           {"max_extent", {s.max_extent_x, s.max_extent_y}}};
}

void from_json(const json& j, WorldSpec& s) {
  reject_unknown(j,
                 {"archetype", "resolution", "rooms", "room_width", "room_depth", "corridor_length", "corridor_width",
                  "loop_side", "door_width", "wall_thickness", "drop_depth", "ledge_opening", "alcove_depth",
                  "atrium_depth", "margin", "max_extent"},
                 "world spec");
  s = WorldSpec{};
  if (j.contains("archetype")) s.archetype = archetype_from_string(j.at("archetype").get<std::string>());
  read_optional(j, "resolution", s.resolution);
  read_optional(j, "rooms", s.rooms);
  read_optional(j, "room_width", s.room_width);
  read_optional(j, "room_depth", s.room_depth);
  read_optional(j, "corridor_length", s.corridor_length);
  read_optional(j, "corridor_width", s.corridor_width);
  read_optional(j, "loop_side", s.loop_side);
  read_optional(j, "door_width", s.door_width);
  read_optional(j, "wall_thickness", s.wall_thickness);
  read_optional(j, "drop_depth", s.drop_depth);
  read_optional(j, "ledge_opening", s.ledge_opening);
  read_optional(j, "alcove_depth", s.alcove_depth);
  read_optional(j, "atrium_depth", s.atrium_depth);
  read_optional(j, "margin", s.margin);
  if (auto it = j.find("max_extent"); it != j.end()) {
    s.max_extent_x = it->at(0).get<double>();
    s.max_extent_y = it->at(1).get<double>();
  }
}

// ---------------------------------------------------------------------------
// Layout construction

namespace {

struct Rect {
  Vec2d lo;
  Vec2d hi;
  Rect shifted(const Vec2d& o) const { return {lo + o, hi + o}; }
  std::vector<Vec2d> polygon() const { return {lo, {hi.x(), lo.y()}, hi, {lo.x(), hi.y()}}; }
};

Rect rect(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y1}}; }

/// Accumulates rectangles in layout meters and renders them into a World.
class LayoutBuilder {
 public:
  LayoutBuilder(const WorldSpec& spec) : spec_(spec), t_(spec.wall_thickness) {}

  /// Free rectangle enclosed by wall bands just outside it.
  void walled_space(const Rect& r) {
    walls_.push_back(rect(r.lo.x() - t_, r.lo.y() - t_, r.hi.x() + t_, r.lo.y()));
    walls_.push_back(rect(r.lo.x() - t_, r.hi.y(), r.hi.x() + t_, r.hi.y() + t_));
    walls_.push_back(rect(r.lo.x() - t_, r.lo.y(), r.lo.x(), r.hi.y()));
    walls_.push_back(rect(r.hi.x(), r.lo.y(), r.hi.x() + t_, r.hi.y()));
  }

  void room(const Rect& r, const std::string& type, bool walled = true) {
    if (walled) walled_space(r);
    rooms_.push_back({r, type});
  }

  void carve(const Rect& r) { carves_.push_back(r); }
  void obstacle(const Rect& r) { walls_.push_back(r); }
  void railing(const Rect& r) { railings_.push_back(r); }
  void floor_level(const Rect& r, double h) { floors_.push_back({r, h}); }
  void tour(std::vector<Vec2d> pts) { tour_ = std::move(pts); }

  World build() const {
    const double res = spec_.resolution;
    Vec2d lo(1e18, 1e18), hi(-1e18, -1e18);
    auto grow = [&](const Rect& r) {
      lo = lo.cwiseMin(r.lo);
      hi = hi.cwiseMax(r.hi);
    };
    for (const auto& w : walls_) grow(w);
    for (const auto& [r, type] : rooms_) grow(r);
    const Vec2d size = hi - lo;
    if (spec_.max_extent_x > 0 && size.x() + 2 * spec_.margin > spec_.max_extent_x + 1e-9)
      throw WorldError("layout does not fit the requested extent in x");
    if (spec_.max_extent_y > 0 && size.y() + 2 * spec_.margin > spec_.max_extent_y + 1e-9)
      throw WorldError("layout does not fit the requested extent in y");

    const Vec2d offset = Vec2d(spec_.margin, spec_.margin) - lo;
    World w;
    w.resolution = res;
    w.width = int(std::lround((size.x() + 2 * spec_.margin) / res));
    w.height = int(std::lround((size.y() + 2 * spec_.margin) / res));
    w.floor.assign(std::size_t(w.width) * w.height, 0.0);
    w.kind.assign(std::size_t(w.width) * w.height, CellKind::Free);

    auto for_cells = [&](const Rect& r0, auto&& fn) {
      const Rect r = r0.shifted(offset);
      const int x0 = std::max(0, int(std::lround(r.lo.x() / res)));
      const int y0 = std::max(0, int(std::lround(r.lo.y() / res)));
      const int x1 = std::min(w.width, int(std::lround(r.hi.x() / res)));
      const int y1 = std::min(w.height, int(std::lround(r.hi.y() / res)));
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) fn(Cell{x, y});
    };

    for (const auto& [r, h] : floors_) for_cells(r, [&](Cell c) { w.floor[w.index(c)] = h; });
    for (const auto& r : walls_) for_cells(r, [&](Cell c) { w.kind[w.index(c)] = CellKind::Wall; });
    for (const auto& r : carves_) for_cells(r, [&](Cell c) { w.kind[w.index(c)] = CellKind::Free; });
    for (const auto& r : railings_) for_cells(r, [&](Cell c) { w.kind[w.index(c)] = CellKind::Railing; });

    for (const auto& [r, type] : rooms_) {
      const Rect s = r.shifted(offset);
      w.gt_rooms.push_back({s.polygon(), type});
      if (type == "atrium") continue;
      const auto poly = s.polygon();
      for (std::size_t i = 0; i < poly.size(); ++i) w.walls_gt.push_back({poly[i], poly[(i + 1) % poly.size()]});
    }
    for (const auto& p : tour_) w.suggested_tour.push_back(p + offset);
    return w;
  }

 private:
  WorldSpec spec_;
  double t_;
  std::vector<Rect> walls_, carves_, railings_;
  std::vector<std::pair<Rect, double>> floors_;
  std::vector<std::pair<Rect, std::string>> rooms_;
  std::vector<Vec2d> tour_;
};

/// Door through the wall band between two rooms; `vertical` doors cut a horizontal band.
Rect door_in_horizontal_band(double cx, double band_y0, double t, double width) {
  return rect(cx - width / 2, band_y0, cx + width / 2, band_y0 + t);
}
Rect door_in_vertical_band(double cy, double band_x0, double t, double width) {
  return rect(band_x0, cy - width / 2, band_x0 + t, cy + width / 2);
}

double snap(double v, double res) { return std::round(v / res) * res; }

void build_single_room(const WorldSpec& s, LayoutBuilder& b) {
  const double W = s.room_width, D = s.room_depth;
  b.room(rect(0, 0, W, D), "room");
  const double inset = std::min(1.5, std::min(W, D) / 4);
  b.tour({{inset, inset}, {W - inset, inset}, {W - inset, D - inset}, {inset, D - inset}, {inset, inset + 0.5}});
}

void build_corridor(const WorldSpec& s, LayoutBuilder& b) {
  const double L = s.corridor_length, w = s.corridor_width, t = s.wall_thickness, dw = s.door_width;
  const double stub = 1.5;
  const double cy = snap(w / 2, s.resolution);
  b.room(rect(0, 0, L, w), "corridor");
  b.walled_space(rect(-t - stub, cy - dw / 2, -t, cy + dw / 2));
  b.walled_space(rect(L + t, cy - dw / 2, L + t + stub, cy + dw / 2));
  b.carve(door_in_vertical_band(cy, -t, t, dw));
  b.carve(door_in_vertical_band(cy, L, t, dw));
  const double in_stub = stub - 0.5;
  const Vec2d left(-t - in_stub, cy), right(L + t + in_stub, cy);
  if (s.alcove_depth <= 0) {
    b.tour({left, right, left});
    return;
  }
  // dead end halfway along; every visit splits the pass into two partial corridors
  const double ax = snap(L / 2, s.resolution);
  b.walled_space(rect(ax - dw / 2, w + t, ax + dw / 2, w + t + s.alcove_depth));
  b.carve(door_in_horizontal_band(ax, w, t, dw));
  const Vec2d mouth(ax, cy), inner(ax, w + t + s.alcove_depth - 0.5);
  b.tour({left, mouth, inner, mouth, right, mouth, inner, mouth, left});
}

void build_square_loop(const WorldSpec& s, LayoutBuilder& b) {
  const double S = s.loop_side, w = s.corridor_width, t = s.wall_thickness, dw = s.door_width;
  b.room(rect(0, 0, S, w), "corridor");                  // bottom
  b.room(rect(S - w, w + t, S, S - w - t), "corridor");  // right
  b.room(rect(0, S - w, S, S), "corridor");              // top
  b.room(rect(0, w + t, w, S - w - t), "corridor");      // left
  const double c = snap(w / 2, s.resolution);
  b.carve(door_in_horizontal_band(S - c, w, t, dw));
  b.carve(door_in_horizontal_band(S - c, S - w - t, t, dw));
  b.carve(door_in_horizontal_band(c, S - w - t, t, dw));
  b.carve(door_in_horizontal_band(c, w, t, dw));
  b.tour({{1.5, c}, {S - c, c}, {S - c, S - c}, {c, S - c}, {c, c}, {S - c, c}, {S - c, w + t + 3.0}});
}

void build_multi_room(const WorldSpec& s, LayoutBuilder& b) {
  const int n = std::max(1, s.rooms);
  const double W = s.room_width, D = s.room_depth, t = s.wall_thickness, wc = s.corridor_width, dw = s.door_width;
  const double Lc = n * (W + t) - t;
  b.room(rect(0, 0, Lc, wc), "corridor");
  const double cy = snap(wc / 2, s.resolution);
  std::vector<Vec2d> tour;
  auto room_x = [&](int k) { return k * (W + t); };
  for (int k = 0; k < n; ++k) {
    const double x0 = room_x(k);
    b.room(rect(x0, wc + t, x0 + W, wc + t + D), "room");
    b.carve(door_in_horizontal_band(snap(x0 + W / 2, s.resolution), wc, t, dw));
  }
  if (s.atrium_depth > 0) {
    const double ya = wc + 2 * t + D;
    b.room(rect(0, ya, Lc, ya + s.atrium_depth), "atrium");
    b.floor_level(rect(0, ya, Lc, ya + s.atrium_depth), -s.drop_depth);
    for (int k = 0; k < n; ++k)
      b.carve(door_in_horizontal_band(snap(room_x(k) + W / 2, s.resolution), ya - t, t, s.ledge_opening));
  }
  auto visit = [&](int k, bool first) {
    const double xc = snap(room_x(k) + W / 2, s.resolution);
    const double y0 = wc + t;
    const double r = std::min(1.5, std::min(W, D) / 4);
    if (!first) tour.push_back({xc, y0 + 1.0});
    tour.push_back({xc - r, y0 + D / 2 - r});
    tour.push_back({xc + r, y0 + D / 2 - r});
    tour.push_back({xc + r, y0 + D / 2 + r});
    tour.push_back({xc - r, y0 + D / 2 + r});
    tour.push_back({xc - r, y0 + 1.0});
    tour.push_back({xc, y0 + 1.0});
    tour.push_back({xc, cy});
  };
  for (int k = 0; k < n; ++k) {
    visit(k, k == 0);
    const int next = k + 1 < n ? k + 1 : 0;
    tour.push_back({snap(room_x(next) + W / 2, s.resolution), cy});
  }
  // revisit the first room
  const double xc0 = snap(W / 2, s.resolution);
  tour.push_back({xc0, wc + t + 1.0});
  tour.push_back({xc0, wc + t + D / 2});
  b.tour(std::move(tour));
}

void build_mezzanine(const WorldSpec& s, LayoutBuilder& b) {
  const double W = s.room_width, D = s.room_depth, t = s.wall_thickness, dw = s.door_width;
  const double Wm = 8.0, Wa = 6.0, res = s.resolution;
  const double mx0 = W + t, mx1 = mx0 + Wm, ax1 = mx1 + Wa;
  b.room(rect(0, 0, W, D), "room");
  b.walled_space(rect(mx0, 0, ax1, D));
  b.room(rect(mx0, 0, mx1, D), "room", false);
  b.room(rect(mx1, 0, ax1, D), "atrium", false);
  b.floor_level(rect(mx1, 0, ax1, D), -s.drop_depth);
  const double cy = snap(D / 2, res);
  const double o0 = snap(cy - s.ledge_opening / 2, res), o1 = snap(cy + s.ledge_opening / 2, res);
  b.railing(rect(mx1, 0, mx1 + res, o0));
  b.railing(rect(mx1, o1, mx1 + res, D));
  b.carve(door_in_vertical_band(cy, W, t, dw));
  const double r = std::min(1.5, std::min(W, D) / 4);
  b.tour({{W / 2 - r, cy - r},
          {W / 2 + r, cy - r},
          {W / 2 + r, cy},
          {mx0 + 1.5, cy},
          {mx0 + 1.5, 1.5},
          {mx1 - 1.2, 1.5},
          {mx1 - 1.2, D - 1.5},
          {mx0 + 1.5, D - 1.5},
          {mx0 + 1.5, cy},
          {W / 2, cy}});
}

void build_large_room(const WorldSpec& s, LayoutBuilder& b, std::uint64_t seed) {
  const double W = std::max(s.room_width, 12.0), D = std::max(s.room_depth, 10.0), res = s.resolution;
  b.room(rect(0, 0, W, D), "room");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.5, 0.5);
  // pillars on a coarse lattice, clear of the tour ring
  const std::array<Vec2d, 4> anchors = {Vec2d(W / 3, D / 3), Vec2d(2 * W / 3, D / 3), Vec2d(W / 3, 2 * D / 3),
                                        Vec2d(2 * W / 3, 2 * D / 3)};
  for (const auto& a : anchors) {
    const double x = snap(a.x() + jitter(rng), res), y = snap(a.y() + jitter(rng), res);
    b.obstacle(rect(x - 0.4, y - 0.4, x + 0.4, y + 0.4));
  }
  b.tour({{1.5, 1.5}, {W - 1.5, 1.5}, {W - 1.5, D - 1.5}, {1.5, D - 1.5}, {1.5, 2.0}});
}

}  // namespace

World generate_world(const WorldSpec& spec, std::uint64_t seed) {
  if (!(spec.resolution > 0)) throw WorldError("resolution must be positive");
  if (spec.rooms < 1) throw WorldError("world spec must request at least one room");
  if (spec.room_width <= 2 * spec.wall_thickness || spec.room_depth <= 2 * spec.wall_thickness)
    throw WorldError("room dimensions too small");
  LayoutBuilder b(spec);
  switch (spec.archetype) {
    case Archetype::SingleRoom: build_single_room(spec, b); break;
    case Archetype::Corridor: build_corridor(spec, b); break;
    case Archetype::SquareLoop: build_square_loop(spec, b); break;
    case Archetype::MultiRoom: build_multi_room(spec, b); break;
    case Archetype::Mezzanine: build_mezzanine(spec, b); break;
    case Archetype::LargeRoom: build_large_room(spec, b, seed); break;
  }
  return b.build();
}

// ---------------------------------------------------------------------------
// Serialization

json world_to_json(const World& w) {
  json obstacles = json::array(), railings = json::array();
  for (int y = 0; y < w.height; ++y)
    for (int x = 0; x < w.width; ++x) {
      const auto k = w.kind[w.index({x, y})];
      if (k != CellKind::Free) obstacles.push_back({x, y});
      if (k == CellKind::Railing) railings.push_back({x, y});
    }
  json rooms = json::array();
  for (const auto& r : w.gt_rooms) {
    json poly = json::array();
    for (const auto& p : r.polygon) poly.push_back({p.x(), p.y()});
    rooms.push_back({{"polygon", poly}, {"type", r.type}});
  }
  json walls = json::array();
  for (const auto& s : w.walls_gt) walls.push_back({{s.a.x(), s.a.y()}, {s.b.x(), s.b.y()}});
  json tour = json::array();
  for (const auto& p : w.suggested_tour) tour.push_back({p.x(), p.y()});
  return json{{"resolution", w.resolution}, {"extent", {w.width, w.height}}, {"height", w.floor},
              {"obstacles", obstacles},     {"railings", railings},          {"gt_rooms", rooms},
              {"walls_gt", walls},          {"tour", tour}};
}

World world_from_json(const json& j) {
  reject_unknown(j, {"resolution", "extent", "height", "obstacles", "railings", "gt_rooms", "walls_gt", "tour"},
                 "world file");
  World w;
  try {
    w.resolution = j.at("resolution").get<double>();
    w.width = j.at("extent").at(0).get<int>();
    w.height = j.at("extent").at(1).get<int>();
    if (!(w.resolution > 0) || w.width <= 0 || w.height <= 0) throw WorldError("world file: invalid grid geometry");
    w.floor = j.at("height").get<std::vector<double>>();
    if (w.floor.size() != std::size_t(w.width) * w.height)
      throw WorldError("world file: height array has " + std::to_string(w.floor.size()) + " entries, expected " +
                       std::to_string(std::size_t(w.width) * w.height));
    w.kind.assign(w.floor.size(), CellKind::Free);
    auto mark = [&](const json& list, CellKind k, const char* what) {
      for (std::size_t i = 0; i < list.size(); ++i) {
        const Cell c{list[i].at(0).get<int>(), list[i].at(1).get<int>()};
        if (!w.on_grid(c)) throw WorldError(std::string("world file: ") + what + " record " + std::to_string(i) + " is off-grid");
        w.kind[w.index(c)] = k;
      }
    };
    mark(j.at("obstacles"), CellKind::Wall, "obstacles");
    if (j.contains("railings")) mark(j.at("railings"), CellKind::Railing, "railings");
    for (const auto& r : j.at("gt_rooms")) {
      GtRoom room;
      room.type = r.at("type").get<std::string>();
      for (const auto& p : r.at("polygon")) room.polygon.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
      w.gt_rooms.push_back(std::move(room));
    }
    for (const auto& s : j.at("walls_gt"))
      w.walls_gt.push_back({{s[0][0].get<double>(), s[0][1].get<double>()}, {s[1][0].get<double>(), s[1][1].get<double>()}});
    if (j.contains("tour"))
      for (const auto& p : j.at("tour")) w.suggested_tour.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
  } catch (const json::exception& e) {
    throw WorldError(std::string("world file: ") + e.what());
  }
  return w;
}

void SensorModel::validate() const {
  if (!(max_range > 0)) throw WorldError("sensor: max_range must be positive");
  if (n_beams < 8) throw WorldError("sensor: n_beams must be at least 8");
  if (range_noise_sigma < 0) throw WorldError("sensor: range_noise_sigma must be non-negative");
}

double SensorModel::beam_angle(int i) const {
  return wrap_angle(angular_origin + 2.0 * std::numbers::pi * i / n_beams);
}

void to_json(json& j, const SensorModel& s) {
  j = json{{"max_range", s.max_range},         {"n_beams", s.n_beams},
           {"range_noise_sigma", s.range_noise_sigma}, {"angular_origin", s.angular_origin},
           {"sensor_height", s.sensor_height}, {"edge_threshold", s.edge_threshold}};
}

void from_json(const json& j, SensorModel& s) {
  reject_unknown(j, {"max_range", "n_beams", "range_noise_sigma", "angular_origin", "sensor_height", "edge_threshold"},
                 "sensor");
  s = SensorModel{};
  read_optional(j, "max_range", s.max_range);
  read_optional(j, "n_beams", s.n_beams);
  read_optional(j, "range_noise_sigma", s.range_noise_sigma);
  read_optional(j, "angular_origin", s.angular_origin);
  read_optional(j, "sensor_height", s.sensor_height);
  read_optional(j, "edge_threshold", s.edge_threshold);
}

void NoiseModel::validate() const {
  if (odom_trans_sigma < 0 || odom_rot_sigma < 0) throw WorldError("noise: sigmas must be non-negative");
}

void to_json(json& j, const NoiseModel& n) {
  j = json{{"odom_trans_sigma", n.odom_trans_sigma},
           {"odom_rot_sigma", n.odom_rot_sigma},
           {"bias_per_meter", {n.bias_per_meter.x(), n.bias_per_meter.y(), n.bias_per_meter.z()}}};
}

void from_json(const json& j, NoiseModel& n) {
  reject_unknown(j, {"odom_trans_sigma", "odom_rot_sigma", "bias_per_meter"}, "noise");
  n = NoiseModel{};
  read_optional(j, "odom_trans_sigma", n.odom_trans_sigma);
  read_optional(j, "odom_rot_sigma", n.odom_rot_sigma);
  if (auto it = j.find("bias_per_meter"); it != j.end())
    n.bias_per_meter = Vec3d(it->at(0).get<double>(), it->at(1).get<double>(), it->at(2).get<double>());
}

std::vector<Vec2d> Scan::hit_points() const {
  std::vector<Vec2d> pts;
  pts.reserve(beams.size());
  for (const auto& b : beams)
    if (b.range < max_range) pts.emplace_back(b.range * std::cos(b.angle), b.range * std::sin(b.angle));
  return pts;
}

// ---------------------------------------------------------------------------
// Simulation

Scan simulate_scan(const World& world, const Pose2& pose, const SensorModel& sensor, std::mt19937_64* rng) {
  sensor.validate();
  const Cell start = cell_of(pose.t, world.resolution);
  if (!world.on_grid(start)) throw WorldError("simulate_scan: pose is off-grid");
  if (world.is_obstacle(start)) throw WorldError("simulate_scan: pose lies on an obstacle cell");

  const double robot_floor = world.floor_at(start);
  const double plane = robot_floor + sensor.sensor_height;
  std::normal_distribution<double> noise(0.0, sensor.range_noise_sigma);

  Scan scan;
  scan.max_range = sensor.max_range;
  scan.beams.reserve(sensor.n_beams);
  for (int i = 0; i < sensor.n_beams; ++i) {
    Beam beam;
    beam.angle = sensor.beam_angle(i);
    const double heading = pose.theta + beam.angle;
    const Vec2d dir(std::cos(heading), std::sin(heading));
    beam.range = sensor.max_range;
    march_ray(pose.t, dir, sensor.max_range, world.resolution, [&](const Cell& c, double t_enter, double) {
      if (c == start) return true;
      if (!world.on_grid(c)) return false;
      const double h = world.floor_at(c);
      if (world.is_obstacle(c) || h > plane) {
        beam.range = t_enter;
        return false;
      }
      if (beam.edge_range < 0 && std::abs(h - robot_floor) > sensor.edge_threshold) {
        beam.edge_range = t_enter;
        beam.edge_dh = h - robot_floor;
      }
      return true;
    });
    if (rng != nullptr && sensor.range_noise_sigma > 0) {
      if (beam.range < sensor.max_range) beam.range = std::clamp(beam.range + noise(*rng), 0.0, sensor.max_range);
      if (beam.edge_range >= 0) beam.edge_range = std::clamp(beam.edge_range + noise(*rng), 0.0, beam.range);
    }
    scan.beams.push_back(beam);
  }
  return scan;
}

std::vector<Pose2> tour_to_waypoints(std::span<const Vec2d> tour) {
  std::vector<Pose2> out;
  for (std::size_t i = 0; i < tour.size(); ++i) {
    double heading = 0.0;
    if (i + 1 < tour.size()) {
      const Vec2d d = tour[i + 1] - tour[i];
      heading = std::atan2(d.y(), d.x());
    } else if (i > 0) {
      heading = out.back().theta;
    }
    out.emplace_back(tour[i], heading);
  }
  return out;
}

namespace {

constexpr double kStepLength = 0.1;
constexpr double kRotationStep = 10.0 * std::numbers::pi / 180.0;
constexpr double kStepDt = 0.1;

void check_free(const World& world, const Vec2d& p, const char* what) {
  const Cell c = cell_of(p, world.resolution);
  if (!world.on_grid(c)) throw WorldError(std::string(what) + " is off-grid");
  if (world.is_obstacle(c)) throw WorldError(std::string(what) + " lies inside an obstacle");
}

}  // namespace

RunLog simulate_run(const World& world, std::span<const Pose2> waypoints, const SensorModel& sensor,
                    const NoiseModel& noise, std::uint64_t seed) {
  sensor.validate();
  noise.validate();
  if (waypoints.empty()) throw WorldError("simulate_run: empty trajectory");
  for (std::size_t i = 0; i < waypoints.size(); ++i)
    check_free(world, waypoints[i].t, ("waypoint " + std::to_string(i)).c_str());

  // dense true trajectory
  std::vector<Pose2> poses{waypoints.front()};
  for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
    const Vec2d a = waypoints[i].t, b = waypoints[i + 1].t;
    const Vec2d d = b - a;
    const double len = d.norm();
    if (len < 1e-9) continue;
    const double heading = std::atan2(d.y(), d.x());
    double current = poses.back().theta;
    const double turn = wrap_angle(heading - current);
    const int n_rot = int(std::ceil(std::abs(turn) / kRotationStep - 1e-9));
    for (int k = 1; k <= n_rot; ++k) poses.emplace_back(a, current + turn * k / n_rot);
    const int n = std::max(1, int(std::lround(len / kStepLength)));
    for (int k = 1; k <= n; ++k) {
      const Vec2d p = a + d * (double(k) / n);
      check_free(world, p, ("segment " + std::to_string(i) + " pose").c_str());
      poses.emplace_back(p, heading);
    }
  }

  std::mt19937_64 odom_rng(seed * 2654435761ULL + 1);
  std::mt19937_64 scan_rng(seed * 2654435761ULL + 2);
  std::normal_distribution<double> unit(0.0, 1.0);

  RunLog log;
  log.sensor = sensor;
  log.steps.reserve(poses.size());
  Pose2 odom = poses.front();
  for (std::size_t k = 0; k < poses.size(); ++k) {
    if (k > 0) {
      const Pose2 delta = poses[k - 1].between(poses[k]);
      const double ds = delta.t.norm();
      const double sq = std::sqrt(ds);
      const Vec3d b = noise.bias_per_meter * ds;
      Pose2 noisy(delta.x() + b.x() + noise.odom_trans_sigma * sq * unit(odom_rng),
                  delta.y() + b.y() + noise.odom_trans_sigma * sq * unit(odom_rng),
                  delta.theta + b.z() + noise.odom_rot_sigma * sq * unit(odom_rng));
      odom = odom * noisy;
    }
    RunStep step;
    step.t = k * kStepDt;
    step.true_pose = poses[k];
    step.odom_pose = odom;
    step.scan = simulate_scan(world, poses[k], sensor, &scan_rng);
    log.steps.push_back(std::move(step));
  }
  return log;
}

// ---------------------------------------------------------------------------
// RunLog JSON-lines

namespace {
json pose_json(const Pose2& p) { return json::array({p.x(), p.y(), p.theta}); }
Pose2 pose_from(const json& j) { return Pose2(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()); }
}  // namespace

void write_runlog(const RunLog& log, std::ostream& out) {
  out << json{{"sensor", log.sensor}}.dump() << '\n';
  for (const auto& s : log.steps) {
    std::vector<double> ranges;
    ranges.reserve(s.scan.beams.size());
    json edges = json::array();
    for (std::size_t i = 0; i < s.scan.beams.size(); ++i) {
      const auto& b = s.scan.beams[i];
      ranges.push_back(b.range);
      if (b.edge_range >= 0) edges.push_back({i, b.edge_range, b.edge_dh});
    }
    json line{{"t", s.t}, {"true_pose", pose_json(s.true_pose)}, {"odom_pose", pose_json(s.odom_pose)}, {"ranges", ranges}};
    if (!edges.empty()) line["edges"] = edges;
    out << line.dump() << '\n';
  }
}

RunLog read_runlog(std::istream& in) {
  RunLog log;
  std::string line;
  std::size_t lineno = 0;
  bool have_sensor = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("sensor")) {
        if (have_sensor || !log.steps.empty()) throw WorldError("sensor header must be the first record");
        log.sensor = j.at("sensor").get<SensorModel>();
        have_sensor = true;
        continue;
      }
      if (!have_sensor) throw WorldError("missing sensor header before the first step");
      reject_unknown(j, {"t", "true_pose", "odom_pose", "ranges", "edges"}, "runlog step");
      RunStep s;
      s.t = j.at("t").get<double>();
      s.true_pose = pose_from(j.at("true_pose"));
      s.odom_pose = pose_from(j.at("odom_pose"));
      const auto ranges = j.at("ranges").get<std::vector<double>>();
      if (int(ranges.size()) != log.sensor.n_beams)
        throw WorldError("scan has " + std::to_string(ranges.size()) + " beams, sensor declares " +
                         std::to_string(log.sensor.n_beams));
      s.scan.max_range = log.sensor.max_range;
      s.scan.beams.resize(ranges.size());
      for (std::size_t i = 0; i < ranges.size(); ++i) {
        s.scan.beams[i].angle = log.sensor.beam_angle(int(i));
        s.scan.beams[i].range = ranges[i];
      }
      if (j.contains("edges"))
        for (const auto& e : j.at("edges")) {
          const auto i = e.at(0).get<std::size_t>();
          if (i >= s.scan.beams.size()) throw WorldError("edge refers to missing beam " + std::to_string(i));
          s.scan.beams[i].edge_range = e.at(1).get<double>();
          s.scan.beams[i].edge_dh = e.at(2).get<double>();
        }
      if (!log.steps.empty() && !(s.t > log.steps.back().t)) throw WorldError("timestamps must strictly increase");
      log.steps.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw WorldError("runlog line " + std::to_string(lineno) + ": " + e.what());
    } catch (const WorldError& e) {
      throw WorldError("runlog line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (log.steps.empty()) throw WorldError("runlog has no steps");
  return log;
}

json trajectory_to_json(std::span<const Pose2> waypoints) {
  json wp = json::array();
  for (const auto& p : waypoints) wp.push_back(pose_json(p));
  return json{{"waypoints", wp}};
}

std::vector<Pose2> trajectory_from_json(const json& j) {
  reject_unknown(j, {"waypoints"}, "trajectory");
  std::vector<Vec2d> pts;
  std::vector<Pose2> out;
  bool has_heading = true;
  for (const auto& w : j.at("waypoints")) {
    pts.emplace_back(w.at(0).get<double>(), w.at(1).get<double>());
    if (w.size() >= 3)
      out.emplace_back(pts.back(), w.at(2).get<double>());
    else
      has_heading = false;
  }
  if (!has_heading) return tour_to_waypoints(pts);
  return out;
}

CellSet rasterize_polygon(std::span<const Vec2d> polygon, double resolution) {
  std::vector<Cell> cells;
  if (polygon.size() < 3) return CellSet{};
  Vec2d lo = polygon[0], hi = polygon[0];
  for (const auto& p : polygon) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Cell c0 = cell_of(lo, resolution), c1 = cell_of(hi, resolution);
  for (int y = c0.y; y <= c1.y; ++y) {
    for (int x = c0.x; x <= c1.x; ++x) {
      const Vec2d q = cell_center({x, y}, resolution);
      bool inside = false;
      for (std::size_t i = 0, j = polygon.size() - 1; i < polygon.size(); j = i++) {
        const Vec2d& a = polygon[i];
        const Vec2d& b = polygon[j];
        if ((a.y() > q.y()) != (b.y() > q.y()) && q.x() < (b.x() - a.x()) * (q.y() - a.y()) / (b.y() - a.y()) + a.x())
          inside = !inside;
      }
      if (inside) cells.push_back({x, y});
    }
  }
  return CellSet(std::move(cells));
}

}  // namespace tacs
