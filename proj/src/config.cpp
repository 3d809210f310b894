#include "tacs/config.hpp"

#include <set>

namespace tacs {

using nlohmann::json;

std::string to_string(Segmentation s) { return s == Segmentation::Traversability ? "traversability" : "euclidean"; }
std::string to_string(MergeRule r) { return r == MergeRule::Overlap ? "overlap" : "center_distance_1m"; }
std::string to_string(LoopRule r) { return r == LoopRule::CoSG ? "cosg" : "distance_threshold"; }

namespace {

template <typename E>
E enum_from(const std::string& s, std::initializer_list<E> options, const std::string& key) {
  for (E e : options)
    if (to_string(e) == s) return e;
  throw ConfigError("config: invalid value '" + s + "' for '" + key + "'");
}

/// Both visitors walk the same field table so reading and writing cannot drift apart.
template <typename V>
void visit(V& v, PipelineConfig& c) {
  v.field("seed", c.seed);
  v.choice("segmentation", c.segmentation, {Segmentation::Traversability, Segmentation::Euclidean});
  v.choice("merge_rule", c.merge_rule, {MergeRule::Overlap, MergeRule::CenterDistance});
  v.choice("loop_rule", c.loop_rule, {LoopRule::CoSG, LoopRule::DistanceThreshold});
  v.section("robot", [&] {
    v.field("max_step", c.robot.max_step);
    v.angle("max_slope_deg", c.robot.max_slope);
    v.field("radius", c.robot.radius);
  });
  v.section("traversability", [&] {
    v.field("resolution", c.resolution);
    v.field("score_threshold", c.score_threshold);
    v.field("history_keyframes", c.history_keyframes);
    v.field("window_margin", c.window_margin);
    v.field("sensor_range", c.sensor_range);
  });
  v.section("roomseg", [&] {
    v.field("lambda", c.lambda);
    v.field("segment_radius", c.segment_radius);
    v.field("wall_adjacency_dist", c.wall_adjacency_dist);
    v.field("min_adjacent", c.min_adjacent);
    v.field("min_inside_graphs", c.min_inside_graphs);
    v.field("absorb_overlap", c.absorb_overlap);
    v.angle("parallel_tol_deg", c.parallel_tol);
  });
  v.section("walls", [&] {
    v.field("inlier_dist", c.ransac.inlier_dist);
    v.field("min_inliers", c.ransac.min_inliers);
    v.field("min_length", c.ransac.min_length);
    v.field("iterations", c.ransac.iterations);
    v.field("max_planes", c.ransac.max_planes);
    v.field("max_gap", c.ransac.max_gap);
    v.angle("assoc_angle_deg", c.assoc_angle);
    v.field("assoc_offset", c.assoc_offset);
  });
  v.section("merge", [&] {
    v.field("overlap_min", c.overlap_min);
    v.field("residual_tol", c.merge_residual_tol);
    v.field("center_distance", c.center_distance);
  });
  v.section("loop", [&] {
    v.field("d_loop_th", c.loop.d_loop_th);
    v.field("L_part", c.loop.L_part);
    v.field("S_coarse", c.loop.S_coarse);
    v.field("S_fine", c.loop.S_fine);
    v.field("min_keyframe_gap", c.loop.min_keyframe_gap);
    v.field("icp_iterations", c.loop.icp_iterations);
    v.field("inlier_radius", c.loop.inlier_radius);
    v.field("fine_information_scale", c.loop.fine_information_scale);
    v.field("max_candidates_per_keyframe", c.max_candidates_per_keyframe);
  });
  v.section("fgo", [&] {
    v.field("max_iters", c.fgo.max_iters);
    v.field("lambda_init", c.fgo.lambda_init);
    v.field("rel_tol", c.fgo.rel_tol);
    v.field("huber_delta", c.fgo.huber_delta);
  });
  v.section("keyframe", [&] {
    v.field("distance", c.keyframe_distance);
    v.angle("angle_deg", c.keyframe_angle);
  });
  v.section("uncertainty", [&] {
    v.field("odom_trans_sigma", c.odom_trans_sigma);
    v.field("odom_rot_sigma", c.odom_rot_sigma);
    v.field("plane_angle_sigma", c.plane_angle_sigma);
    v.field("plane_offset_sigma", c.plane_offset_sigma);
    v.field("loop_trans_sigma", c.loop_trans_sigma);
    v.field("loop_rot_sigma", c.loop_rot_sigma);
    v.field("room_sigma", c.room_sigma);
    v.field("merge_sigma", c.merge_sigma);
  });
}

class Reader {
 public:
  explicit Reader(const json& root) { push(root, ""); }

  template <typename T>
  void field(const char* key, T& out) {
    const json* v = take(key);
    if (!v) return;
    try {
      out = v->get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config: '" + path(key) + "' has the wrong type");
    }
  }
  void angle(const char* key, double& rad) {
    double deg = rad2deg(rad);
    field(key, deg);
    rad = deg2rad(deg);
  }
  template <typename E>
  void choice(const char* key, E& out, std::initializer_list<E> options) {
    std::string s = to_string(out);
    field(key, s);
    out = enum_from(s, options, path(key));
  }
  template <typename F>
  void section(const char* key, F&& body) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_object()) throw ConfigError("config: '" + path(key) + "' must be an object");
    push(*v, path(key));
    body();
    pop();
  }
  void finish() { pop(); }

 private:
  struct Frame {
    const json* node;
    std::string prefix;
    std::set<std::string> seen;
  };
  std::vector<Frame> stack_;

  void push(const json& node, std::string prefix) {
    if (!node.is_object()) throw ConfigError("config: expected a JSON object");
    stack_.push_back({&node, std::move(prefix), {}});
  }
  void pop() {
    const Frame& f = stack_.back();
    for (const auto& [k, v] : f.node->items())
      if (!f.seen.count(k)) throw ConfigError("config: unknown key '" + (f.prefix.empty() ? k : f.prefix + "." + k) + "'");
    stack_.pop_back();
  }
  std::string path(const char* key) const {
    return stack_.back().prefix.empty() ? std::string(key) : stack_.back().prefix + "." + key;
  }
  const json* take(const char* key) {
    Frame& f = stack_.back();
    f.seen.insert(key);
    auto it = f.node->find(key);
    return it == f.node->end() ? nullptr : &*it;
  }
};

class Writer {
 public:
  json root = json::object();

  template <typename T>
  void field(const char* key, T& v) {
    (*current_)[key] = v;
  }
  void angle(const char* key, double& rad) { (*current_)[key] = rad2deg(rad); }
  template <typename E>
  void choice(const char* key, E& v, std::initializer_list<E>) {
    (*current_)[key] = to_string(v);
  }
  template <typename F>
  void section(const char* key, F&& body) {
    json* saved = current_;
    current_ = &(*current_)[key];
    *current_ = json::object();
    body();
    current_ = saved;
  }

 private:
  json* current_ = &root;
};

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config: ") + what);
  };
  require(resolution > 0, "traversability.resolution must be positive");
  require(lambda > 0, "roomseg.lambda must be positive");
  require(segment_radius > lambda, "roomseg.segment_radius must exceed lambda");
  require(robot.max_step >= 0 && robot.radius >= 0, "robot parameters must be non-negative");
  require(score_threshold >= 0 && score_threshold <= 1, "traversability.score_threshold must lie in [0, 1]");
  require(history_keyframes >= 1, "traversability.history_keyframes must be at least 1");
  require(min_inside_graphs >= 1, "roomseg.min_inside_graphs must be at least 1");
  require(keyframe_distance > 0 && keyframe_angle > 0, "keyframe thresholds must be positive");
  require(overlap_min > 0 && overlap_min <= 1, "merge.overlap_min must lie in (0, 1]");
  require(ransac.min_inliers >= 2 && ransac.iterations >= 1, "walls RANSAC parameters out of range");
  require(odom_trans_sigma > 0 && odom_rot_sigma > 0 && plane_angle_sigma > 0 && plane_offset_sigma > 0 &&
              loop_trans_sigma > 0 && loop_rot_sigma > 0 && room_sigma > 0 && merge_sigma > 0,
          "uncertainty sigmas must be positive");
  require(fgo.max_iters >= 1 && fgo.huber_delta > 0, "fgo parameters out of range");
  try {
    loop.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  Reader r(j);
  visit(r, c);
  r.finish();
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  PipelineConfig copy = c;
  Writer w;
  visit(w, copy);
  return w.root;
}

}  // namespace tacs
