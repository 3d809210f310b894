#include "tacs/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include <spdlog/spdlog.h>

#include "tacs/traversability.hpp"

namespace tacs {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Mat3d pose_information(double trans_sigma, double rot_sigma) {
  Mat3d info = Mat3d::Zero();
  info(0, 0) = info(1, 1) = 1.0 / (trans_sigma * trans_sigma);
  info(2, 2) = 1.0 / (rot_sigma * rot_sigma);
  return info;
}

/// Keeps at most `n` points, evenly spaced through the list.
std::vector<Vec2d> thin(std::span<const Vec2d> pts, std::size_t n) {
  if (pts.size() <= n) return {pts.begin(), pts.end()};
  std::vector<Vec2d> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(pts[i * pts.size() / n]);
  return out;
}

std::pair<double, double> project_span(std::span<const Vec2d> pts, const Line2<double>& line) {
  const Vec2d t(-std::sin(line.phi), std::cos(line.phi));
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& p : pts) {
    lo = std::min(lo, t.dot(p));
    hi = std::max(hi, t.dot(p));
  }
  return {lo, hi};
}

constexpr std::size_t kInliersPerObservation = 80;
constexpr std::array kCategories{WallCategory::XPlus, WallCategory::XMinus, WallCategory::YPlus, WallCategory::YMinus};

json pose_json(const Pose2& p) { return json::array({p.x(), p.y(), p.theta}); }

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)), accumulator_(cfg_.min_inside_graphs) {
  cfg_.validate();
}

Pose2 Pipeline::estimate(int keyframe) const { return as_pose(graph_.variable(keyframes_.at(keyframe).var)); }

void Pipeline::optimize() {
  const auto st = graph_.optimize(cfg_.fgo);
  stats_.t_fgo += st.wall_time;
  ++stats_.optimizations;
}

void Pipeline::process(const RunStep& step) {
  now_ = step.t;
  bool make = keyframes_.empty();
  if (!make) {
    const Keyframe& last = keyframes_.back();
    const Pose2 d = last.odom.between(step.odom_pose);
    make = d.t.norm() >= cfg_.keyframe_distance || std::abs(d.theta) >= cfg_.keyframe_angle;
  }
  last_step_ = step;
  last_step_was_keyframe_ = make;
  if (make) add_keyframe(step);
}

void Pipeline::finish() {
  if (last_step_ && !last_step_was_keyframe_) {
    const Pose2 d = keyframes_.back().odom.between(last_step_->odom_pose);
    if (d.t.norm() > 0.05 || std::abs(d.theta) > 0.05) add_keyframe(*last_step_);
  }
  if (auto done = accumulator_.flush()) handle_completed_room(*done);
  pending_union_ = {};
  optimize();
}

int Pipeline::add_keyframe(const RunStep& step) {
  Keyframe kf;
  kf.id = int(keyframes_.size());
  kf.t = step.t;
  kf.odom = step.odom_pose;
  kf.truth = step.true_pose;
  kf.scan = step.scan;
  kf.points = step.scan.hit_points();
  if (keyframes_.empty()) {
    kf.var = graph_.add_variable(pose_variable(step.odom_pose, true));
  } else {
    const Keyframe& prev = keyframes_.back();
    const Pose2 delta = prev.odom.between(step.odom_pose);
    kf.var = graph_.add_variable(pose_variable(estimate(prev.id) * delta));
    const double ds = std::max(delta.t.norm(), 0.1);
    OdometryFactor f{prev.var, kf.var, delta,
                     pose_information(cfg_.odom_trans_sigma * std::sqrt(ds), cfg_.odom_rot_sigma * std::sqrt(ds))};
    graph_.add_factor(f);
  }
  keyframes_.push_back(std::move(kf));
  Keyframe& k = keyframes_.back();
  observe_walls(k);
  optimize();
  refresh_wall_spans();

  if (cfg_.loop_rule == LoopRule::DistanceThreshold) distance_threshold_loop_closure(k.id);

  const CellSet inside = segment(keyframes_.back());
  spdlog::trace("kf {}: inside graph {} cells, {} shared with pending", k.id, inside.size(),
                pending_union_.intersection_size(inside));
  if (!inside.empty()) {
    const Pose2 inv = estimate(k.id).inverse();
    RoomPart part{k.id, {}};
    part.local.reserve(inside.size());
    for (const auto& c : inside) part.local.push_back(inv * cell_center(c, cfg_.resolution));
    pending_parts_[k.id] = std::move(part);
    // A graph disjoint from everything pending belongs to a different room.
    if (accumulator_.active() && pending_union_.intersection_size(inside) == 0) {
      if (auto done = accumulator_.flush()) handle_completed_room(*done);
      pending_union_ = {};
    }
    pending_union_ = pending_union_.united(inside);
  }
  if (auto done = accumulator_.accumulate(inside, k.id)) {
    pending_union_ = {};
    handle_completed_room(*done);
  } else if (inside.empty()) {
    pending_union_ = {};
  }
  return keyframes_.back().id;
}

void Pipeline::observe_walls(Keyframe& kf) {
  RansacParams rp = cfg_.ransac;
  rp.seed = cfg_.seed * 1000003ULL + std::uint64_t(kf.id);
  const auto planes = extract_walls(kf.points, rp, Frame::Body, Vec2d::Zero());
  const Pose2 pose = estimate(kf.id);
  std::vector<WallView> views;
  views.reserve(walls_.size());
  for (const auto& [id, w] : walls_) views.push_back({id, as_line(graph_.variable(w.var)), w.span});

  Mat2d info = Mat2d::Zero();
  info(0, 0) = 1.0 / (cfg_.plane_angle_sigma * cfg_.plane_angle_sigma);
  info(1, 1) = 1.0 / (cfg_.plane_offset_sigma * cfg_.plane_offset_sigma);
  for (const auto& body : planes) {
    const Plane map = transform_plane(body, pose);
    int id;
    if (auto hit = associate_wall(map, views, cfg_.assoc_angle, cfg_.assoc_offset)) {
      id = *hit;
    } else {
      id = add_wall(map.line(), classify_wall(map.normal, map.normal));
      views.push_back({id, map.line(), map.span()});
    }
    WallNode& w = walls_.at(id);
    w.observations.push_back({kf.id, thin(body.inliers, kInliersPerObservation)});
    const auto s = project_span(map.inliers, as_line(graph_.variable(w.var)));
    w.span = {std::min(w.span.first, s.first), std::max(w.span.second, s.second)};
    for (auto& v : views)
      if (v.id == id) v.span = w.span;
    graph_.add_factor(PosePlaneFactor{kf.var, w.var, body.line(), info});
  }
}

int Pipeline::add_wall(const Line2<double>& map_line, WallCategory category) {
  WallNode w;
  w.var = graph_.add_variable(wall_variable(map_line));
  w.id = w.var;
  w.category = category;
  w.span = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  walls_[w.id] = w;
  return w.id;
}

void Pipeline::refresh_wall_spans() {
  for (auto& [id, w] : walls_) {
    const Line2<double> line = as_line(graph_.variable(w.var));
    w.span = {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& o : w.observations) {
      const Pose2 T = estimate(o.keyframe);
      std::vector<Vec2d> pts;
      pts.reserve(o.inliers.size());
      for (const auto& p : o.inliers) pts.push_back(T * p);
      const auto s = project_span(pts, line);
      w.span = {std::min(w.span.first, s.first), std::max(w.span.second, s.second)};
    }
  }
}

std::vector<WallSupport> Pipeline::wall_supports() const {
  std::vector<WallSupport> out;
  for (const auto& [id, w] : walls_) {
    WallSupport s{id, w.category, as_line(graph_.variable(w.var)), {}};
    for (const auto& o : w.observations) {
      const Pose2 T = estimate(o.keyframe);
      for (const auto& p : o.inliers) s.points.push_back(T * p);
    }
    out.push_back(std::move(s));
  }
  return out;
}

CellSet Pipeline::segment(const Keyframe& kf) {
  const Pose2 pose = estimate(kf.id);
  auto field = TraversabilityField::around(pose.t, cfg_.sensor_range + cfg_.window_margin, cfg_.resolution,
                                           cfg_.robot, cfg_.score_threshold);
  const int first = std::max(0, kf.id - cfg_.history_keyframes + 1);
  for (int i = first; i <= kf.id; ++i) update_field(field, keyframes_[i].scan, estimate(i));

  TraversableGraph g;
  std::vector<Cell> obstacles;
  const auto& grid = field.grid();
  if (cfg_.segmentation == Segmentation::Traversability) {
    infer_occluded(field);
    try {
      g = build_traversable_graph(field, pose);
    } catch (const NotTraversableError&) {
      return {};
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const FieldCell& c = grid.at(i);
      if (c.state != CellState::Unknown && (c.obstacle || !c.traversable)) obstacles.push_back(grid.cell(i));
    }
  } else {
    field.classify();
    g = build_free_space_graph(field, pose);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (grid.at(i).obstacle) obstacles.push_back(grid.cell(i));
  }
  if (g.empty()) return {};
  SafeGraph safe = compute_safe_graph(g, obstacles, cfg_.lambda);
  // Far returns are too sparse to close doorways; only the vicinity counts.
  TraversableGraph near;
  near.resolution = safe.graph.resolution;
  std::vector<int> remap(safe.graph.nodes.size(), -1);
  const double r2 = cfg_.segment_radius * cfg_.segment_radius;
  for (std::size_t i = 0; i < safe.graph.nodes.size(); ++i)
    if ((safe.graph.nodes[i].position - pose.t).squaredNorm() <= r2) {
      remap[i] = int(near.nodes.size());
      near.nodes.push_back(safe.graph.nodes[i]);
    }
  for (const auto& [a, b] : safe.graph.edges)
    if (remap[a] >= 0 && remap[b] >= 0) near.edges.emplace_back(remap[a], remap[b]);
  safe.graph = std::move(near);
  return extract_inside(safe, pose);
}

CellSet Pipeline::room_cells(const RoomRecord& r) const {
  std::vector<Cell> cells;
  for (const auto& part : r.parts) {
    const Pose2 T = estimate(part.keyframe);
    for (const auto& p : part.local) cells.push_back(cell_of(T * p, cfg_.resolution));
  }
  return CellSet(std::move(cells));
}

void Pipeline::refresh_rooms() {
  for (auto& [id, r] : rooms_) {
    r.node.cells = room_cells(r);
    // A corridor's free axis follows its cells, no wall pins it.
    Variable& cv = graph_.variable(r.vars.center);
    const Vec2d c = centroid(r.node.cells, cfg_.resolution);
    if (!constrains_x(r.node.type)) cv.value[0] = c.x();
    if (!constrains_y(r.node.type)) cv.value[1] = c.y();
    r.node.center = as_point(cv);
    for (std::size_t k = 0; k < 4; ++k) r.node.walls[k] = r.vars.walls[k];
  }
}

std::vector<RoomNode> Pipeline::room_nodes() const {
  std::vector<RoomNode> out;
  for (const auto& [id, r] : rooms_) out.push_back(r.node);
  return out;
}

int Pipeline::add_room(RoomNode node, std::vector<RoomPart> parts) {
  RoomRecord r;
  node.id = next_room_id_++;
  r.vars.center = graph_.add_variable(room_variable(node.center));
  r.vars.walls = node.walls;
  node.keyframes.clear();
  for (const auto& p : parts) {
    node.keyframes.push_back(p.keyframe);
    keyframes_.at(p.keyframe).room = node.id;
  }
  std::sort(node.keyframes.begin(), node.keyframes.end());
  const double info = 1.0 / (cfg_.room_sigma * cfg_.room_sigma);
  for (int axis = 0; axis < 2; ++axis) {
    if (axis == 0 ? !constrains_x(node.type) : !constrains_y(node.type)) continue;
    const int plus = node.walls[2 * axis], minus = node.walls[2 * axis + 1];
    if (plus < 0 || minus < 0) continue;
    r.room_wall_factors.push_back(graph_.add_factor(RoomWallFactor{r.vars.center, plus, minus, axis, info}));
  }
  r.parts = std::move(parts);
  r.node = std::move(node);
  const int id = r.node.id;
  rooms_[id] = std::move(r);
  return id;
}

void Pipeline::handle_completed_room(const CompletedRoom& room) {
  RoomDiagnostic diag{now_, room.start_keyframe, room.end_keyframe, room.cells.size(), ""};
  std::vector<RoomPart> parts;
  for (const auto& ig : room.parts) {
    auto it = pending_parts_.find(ig.keyframe);
    if (it == pending_parts_.end()) continue;
    parts.push_back(std::move(it->second));
    pending_parts_.erase(it);
  }
  RoomRecord probe;
  probe.parts = parts;
  const CellSet cells = room_cells(probe);

  auto supports = wall_supports();
  const BoundingSelection sel = select_bounding_walls(cells, cfg_.resolution, supports, cfg_.wall_adjacency_dist);
  RoomDecision decision =
      classify_and_make_room(sel, supports, cells, cfg_.resolution, cfg_.min_adjacent, cfg_.parallel_tol);

  refresh_rooms();
  if (!decision.room) {
    int best = -1;
    double best_ratio = 0.0;
    for (const auto& [id, r] : rooms_) {
      const double ratio = overlap_ratio(r.node.cells, cells);
      if (ratio > best_ratio) best_ratio = ratio, best = id;
    }
    if (best >= 0 && best_ratio >= cfg_.absorb_overlap) {
      absorb(best, std::move(parts));
      diag.outcome = "absorbed into room " + std::to_string(best) + ": " + decision.diagnostic;
    } else {
      diag.outcome = "dropped: " + decision.diagnostic;
    }
    spdlog::debug("room kf {}..{}: {}", room.start_keyframe, room.end_keyframe, diag.outcome);
    diagnostics_.push_back(diag);
    return;
  }

  std::vector<RoomSummary> existing;
  for (const auto& [id, r] : rooms_) existing.push_back({id, r.node.type, r.node.center, &r.node.cells});

  const int id = add_room(std::move(*decision.room), std::move(parts));
  rooms_.at(id).node.cells = cells;
  diag.outcome = "room " + std::to_string(id) + " (" + to_string(rooms_.at(id).node.type) + ")";
  spdlog::debug("room kf {}..{}: {}", room.start_keyframe, room.end_keyframe, diag.outcome);
  diagnostics_.push_back(diag);
  optimize();

  // Association runs on the estimate at detection time; loop closure only refines what was found.
  refresh_rooms();
  const auto first = merge_candidates(id);

  if (cfg_.loop_rule == LoopRule::CoSG) {
    const RoomRecord& r = rooms_.at(id);
    RoomSummary incoming{id, r.node.type, as_point(graph_.variable(r.vars.center)), &r.node.cells};
    if (auto old = detect_redetection(existing, incoming, cfg_.loop.d_loop_th))
      cosg_loop_closure(*old, r.node.keyframes);
  }
  refresh_rooms();
  refresh_wall_spans();
  merge_step(id, first);
}

void Pipeline::absorb(int room_id, std::vector<RoomPart> parts) {
  RoomRecord& r = rooms_.at(room_id);
  for (auto& p : parts) {
    r.node.keyframes.push_back(p.keyframe);
    keyframes_.at(p.keyframe).room = room_id;
    r.parts.push_back(std::move(p));
  }
  std::sort(r.node.keyframes.begin(), r.node.keyframes.end());
  r.node.cells = room_cells(r);
}

MatchResult Pipeline::score_pair(int kf_old, int kf_new) const {
  const Pose2 initial = estimate(kf_old).between(estimate(kf_new));
  return match_keyframes(keyframes_[kf_old].points, keyframes_[kf_new].points, initial, cfg_.loop.icp_iterations,
                         cfg_.loop.inlier_radius);
}

void Pipeline::add_loop(const LoopEvent& e, const std::string& why) {
  Mat3d info = pose_information(cfg_.loop_trans_sigma, cfg_.loop_rot_sigma);
  if (e.tier == LoopTier::Fine) info *= cfg_.loop.fine_information_scale;
  graph_.add_factor(LoopClosureFactor{keyframes_[e.kf_old].var, keyframes_[e.kf_new].var, e.relative, info});
  loops_.push_back(e);
  spdlog::debug("loop {} -> {} score {:.3f} ({}, {})", e.kf_old, e.kf_new, e.score, to_string(e.tier), why);
}

void Pipeline::cosg_loop_closure(int old_room, const std::vector<int>& new_keyframes) {
  const auto t0 = Clock::now();
  const RoomRecord& r = rooms_.at(old_room);
  std::vector<KeyframeRef> old_refs, new_refs;
  for (int k : r.node.keyframes) old_refs.push_back({k, estimate(k).t});
  for (int k : new_keyframes) new_refs.push_back({k, estimate(k).t});
  std::vector<Vec2d> extent;
  for (const auto& c : r.node.cells) extent.push_back(cell_center(c, cfg_.resolution));
  for (const auto& k : old_refs) extent.push_back(k.position);
  const auto partitions = partition_room(old_refs, extent, cfg_.loop.L_part);
  auto pairs = candidate_pairs(partitions, new_refs, cfg_.loop.L_part, cfg_.loop.min_keyframe_gap);

  // Nearest few old keyframes within d_loop_th of each new keyframe, by current estimate.
  std::map<int, std::vector<std::pair<double, CandidatePair>>> by_new;
  for (const auto& p : pairs) {
    const double d = (estimate(p.kf_old).t - estimate(p.kf_new).t).norm();
    if (d <= cfg_.loop.d_loop_th) by_new[p.kf_new].push_back({d, p});
  }
  std::vector<ScoredCandidate> scored;
  for (auto& [k, list] : by_new) {
    std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    if (list.size() > std::size_t(cfg_.max_candidates_per_keyframe)) list.resize(cfg_.max_candidates_per_keyframe);
    for (const auto& [d, p] : list) scored.push_back({p, score_pair(p.kf_old, p.kf_new)});
  }
  auto events = coarse_to_fine_select(scored, cfg_.loop.S_coarse, cfg_.loop.S_fine);
  stats_.t_ld += seconds_since(t0);
  for (auto& e : events) {
    e.room_id = old_room;
    e.t = now_;
    add_loop(e, "room re-detection");
  }
  if (!events.empty()) optimize();
}

void Pipeline::distance_threshold_loop_closure(int kf) {
  const auto t0 = Clock::now();
  const Vec2d here = estimate(kf).t;
  std::vector<std::pair<double, int>> near;
  for (int k = 0; k + cfg_.loop.min_keyframe_gap <= kf; ++k) {
    const double d = (estimate(k).t - here).norm();
    if (d <= cfg_.loop.d_loop_th) near.push_back({d, k});
  }
  std::stable_sort(near.begin(), near.end());
  if (near.size() > std::size_t(cfg_.max_candidates_per_keyframe)) near.resize(cfg_.max_candidates_per_keyframe);
  std::optional<LoopEvent> best;
  for (const auto& [d, k] : near) {
    const MatchResult m = score_pair(k, kf);
    if (m.score >= cfg_.loop.S_coarse && (!best || m.score > best->score))
      best = LoopEvent{k, kf, m.score, m.relative, LoopTier::Coarse, -1, now_};
  }
  stats_.t_ld += seconds_since(t0);
  if (best) {
    add_loop(*best, "distance threshold");
    optimize();
  }
}

std::vector<MergeCandidate> Pipeline::merge_candidates(int room_id) const {
  const auto nodes = room_nodes();
  const RoomNode& incoming = rooms_.at(room_id).node;
  std::vector<RoomNode> others;
  for (const auto& n : nodes)
    if (n.id != room_id) others.push_back(n);
  return cfg_.merge_rule == MergeRule::Overlap ? find_merge_candidates(others, incoming, cfg_.overlap_min)
                                               : find_center_distance_candidates(others, incoming, cfg_.center_distance);
}

void Pipeline::merge_step(int room_id, std::vector<MergeCandidate> cands) {
  for (bool merged = true; merged;) {
    merged = false;
    for (const auto& c : cands) {
      const int older = std::min(c.existing, room_id), newer = std::max(c.existing, room_id);
      if (try_merge(older, newer)) {
        room_id = older;
        merged = true;
        break;
      }
    }
    if (merged) {
      refresh_rooms();
      cands = merge_candidates(room_id);
    }
  }
}

bool Pipeline::try_merge(int existing, int incoming) {
  RoomRecord& E = rooms_.at(existing);
  RoomRecord& I = rooms_.at(incoming);
  MergeEvent ev{now_, existing, incoming, 0.0, 0.0, false, ""};
  MergeCandidate cand;
  cand.existing = existing;
  cand.incoming = incoming;
  if (!merge_axes(E.node.type, I.node.type, cand.use_x, cand.use_y)) {
    ev.note = "room types share no constrained axis";
    merges_.push_back(ev);
    return false;
  }
  std::string reason;
  const double info = 1.0 / (cfg_.merge_sigma * cfg_.merge_sigma);
  auto set = build_merge_factor(graph_, cand, E.vars, I.vars, cfg_.parallel_tol, &reason, info, info);
  if (!set) {
    ev.note = reason;
    merges_.push_back(ev);
    return false;
  }
  const FactorGraph backup = graph_;
  std::vector<int> ids{graph_.add_factor(set->center)};
  for (const auto& w : set->walls) ids.push_back(graph_.add_factor(w));
  ev.residual_before = merge_residual(graph_, *set);
  optimize();
  ev.residual_after = merge_residual(graph_, *set);
  ev.accepted = ev.residual_after <= cfg_.merge_residual_tol;
  if (!ev.accepted) {
    graph_ = backup;
    ev.note = "residual above tolerance";
    merges_.push_back(ev);
    spdlog::debug("merge {} <- {} rejected, residual {:.4f}", existing, incoming, ev.residual_after);
    return false;
  }
  merges_.push_back(ev);
  spdlog::debug("merge {} <- {} accepted, residual {:.4f} -> {:.4f}", existing, incoming, ev.residual_before,
                ev.residual_after);
  apply_merge(existing, incoming, *set, ids);
  return true;
}

void Pipeline::apply_merge(int existing, int incoming, const MergeFactorSet& set, const std::vector<int>& factor_ids) {
  RoomRecord& E = rooms_.at(existing);
  RoomRecord I = std::move(rooms_.at(incoming));
  rooms_.erase(incoming);

  for (int f : factor_ids) graph_.remove_factor(f);
  for (int f : I.room_wall_factors) graph_.remove_factor(f);
  graph_.remove_variable(I.vars.center);

  // Duplicate walls collapse onto their existing counterparts.
  std::map<int, int> alias;
  for (const auto& mw : set.walls) alias[mw.incoming] = mw.existing;
  auto resolve = [&](int v) {
    auto it = alias.find(v);
    return it == alias.end() ? v : it->second;
  };
  std::map<int, int> renumbered;
  for (const auto& [from, to] : alias) {
    for (int fid : graph_.factors_referencing(from)) {
      Factor f = graph_.factor(fid);
      std::visit(
          [&](auto& x) {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, PosePlaneFactor>) {
              x.wall = resolve(x.wall);
            } else if constexpr (std::is_same_v<T, RoomWallFactor>) {
              x.plus = resolve(x.plus);
              x.minus = resolve(x.minus);
            } else if constexpr (std::is_same_v<T, MergeWallFactor>) {
              x.incoming = resolve(x.incoming);
              x.existing = resolve(x.existing);
            } else if constexpr (std::is_same_v<T, MergeCenterFactor>) {
              for (auto& w : x.incoming_walls)
                if (w >= 0) w = resolve(w);
            }
          },
          f);
      graph_.remove_factor(fid);
      renumbered[fid] = graph_.add_factor(f);
    }
    WallNode& dst = walls_.at(to);
    WallNode& src = walls_.at(from);
    for (auto& o : src.observations) dst.observations.push_back(std::move(o));
    walls_.erase(from);
    graph_.remove_variable(from);
  }
  for (auto& [id, r] : rooms_) {
    for (auto& f : r.room_wall_factors)
      if (auto it = renumbered.find(f); it != renumbered.end()) f = it->second;
    for (auto& w : r.vars.walls)
      if (w >= 0) w = resolve(w);
  }

  // Wall pairs the surviving room lacks are adopted from the incoming one.
  const double info = 1.0 / (cfg_.room_sigma * cfg_.room_sigma);
  for (int axis = 0; axis < 2; ++axis) {
    const std::size_t p = 2 * axis, m = 2 * axis + 1;
    const bool have = E.vars.walls[p] >= 0 && E.vars.walls[m] >= 0;
    const int ip = resolve(I.vars.walls[p] >= 0 ? I.vars.walls[p] : -1);
    const int im = resolve(I.vars.walls[m] >= 0 ? I.vars.walls[m] : -1);
    if (have || ip < 0 || im < 0 || !walls_.count(ip) || !walls_.count(im)) continue;
    E.vars.walls[p] = ip;
    E.vars.walls[m] = im;
    E.room_wall_factors.push_back(graph_.add_factor(RoomWallFactor{E.vars.center, ip, im, axis, info}));
  }
  const bool x_pair = E.vars.walls[0] >= 0 && E.vars.walls[1] >= 0;
  const bool y_pair = E.vars.walls[2] >= 0 && E.vars.walls[3] >= 0;
  if (x_pair && y_pair) E.node.type = RoomType::FourWall;

  for (auto& p : I.parts) {
    keyframes_.at(p.keyframe).room = existing;
    E.node.keyframes.push_back(p.keyframe);
    E.parts.push_back(std::move(p));
  }
  std::sort(E.node.keyframes.begin(), E.node.keyframes.end());
  E.node.keyframes.erase(std::unique(E.node.keyframes.begin(), E.node.keyframes.end()), E.node.keyframes.end());
  optimize();
  refresh_rooms();
  refresh_wall_spans();
}

json Pipeline::export_json(bool timing) const {
  json out;
  out["resolution"] = cfg_.resolution;
  json kfs = json::array();
  for (const auto& k : keyframes_) {
    kfs.push_back({{"id", k.id},
                   {"t", k.t},
                   {"pose", pose_json(estimate(k.id))},
                   {"odom_pose", pose_json(k.odom)},
                   {"true_pose", pose_json(k.truth)},
                   {"room_id", k.room >= 0 ? json(k.room) : json(nullptr)}});
  }
  out["keyframes"] = std::move(kfs);

  json walls = json::array();
  for (const auto& [id, w] : walls_) {
    const Line2<double> l = as_line(graph_.variable(w.var));
    walls.push_back({{"id", id},
                     {"category", to_string(w.category)},
                     {"normal", {std::cos(l.phi), std::sin(l.phi)}},
                     {"offset", l.d},
                     {"observations", w.observations.size()}});
  }
  out["walls"] = std::move(walls);

  json rooms = json::array(), kf_room = json::array(), room_wall = json::array();
  for (const auto& [id, r] : rooms_) {
    const CellSet cells = room_cells(r);
    json wall_ids = json::object();
    for (auto c : kCategories)
      if (r.vars.walls[std::size_t(c)] >= 0) {
        wall_ids[to_string(c)] = r.vars.walls[std::size_t(c)];
        room_wall.push_back({{"room", id}, {"wall", r.vars.walls[std::size_t(c)]}, {"category", to_string(c)}});
      }
    json cell_list = json::array();
    int x0 = std::numeric_limits<int>::max(), y0 = x0, x1 = std::numeric_limits<int>::min(), y1 = x1;
    for (const auto& c : cells) {
      cell_list.push_back({c.x, c.y});
      x0 = std::min(x0, c.x), y0 = std::min(y0, c.y), x1 = std::max(x1, c.x), y1 = std::max(y1, c.y);
    }
    json polygon = json::array();
    if (!cells.empty()) {
      const double res = cfg_.resolution;
      polygon = {{x0 * res, y0 * res}, {(x1 + 1) * res, y0 * res}, {(x1 + 1) * res, (y1 + 1) * res}, {x0 * res, (y1 + 1) * res}};
    }
    const Vec2d center = as_point(graph_.variable(r.vars.center));
    rooms.push_back({{"id", id},
                     {"type", to_string(r.node.type)},
                     {"center", {center.x(), center.y()}},
                     {"wall_ids", wall_ids},
                     {"keyframes", r.node.keyframes},
                     {"polygon", polygon},
                     {"cells", cell_list}});
    for (int k : r.node.keyframes) kf_room.push_back({{"keyframe", k}, {"room", id}});
  }
  out["rooms"] = std::move(rooms);

  json loops = json::array();
  for (const auto& e : loops_)
    loops.push_back({{"kf_old", e.kf_old},
                     {"kf_new", e.kf_new},
                     {"score", e.score},
                     {"tier", to_string(e.tier)},
                     {"room_id", e.room_id >= 0 ? json(e.room_id) : json(nullptr)},
                     {"relative", pose_json(e.relative)}});
  json merges = json::array();
  for (const auto& m : merges_)
    if (m.accepted) merges.push_back({{"existing", m.existing_id}, {"incoming", m.incoming_id}, {"residual", m.residual_after}});
  out["edges"] = {{"keyframe_room", kf_room}, {"room_wall", room_wall}, {"loops", loops}, {"merges", merges}};
  out["stats"] = {{"n_keyframe", keyframes_.size()},
                  {"n_wall", walls_.size()},
                  {"n_room", rooms_.size()},
                  {"n_loop", loops_.size()},
                  {"n_merge", merges.size()}};
  if (timing) out["timing"] = {{"t_fgo", stats_.t_fgo}, {"t_ld", stats_.t_ld}, {"optimizations", stats_.optimizations}};
  return out;
}

json Pipeline::report_json() const {
  json loops = json::array();
  for (const auto& e : loops_)
    loops.push_back({{"t", e.t}, {"kf_old", e.kf_old}, {"kf_new", e.kf_new}, {"score", e.score}, {"tier", to_string(e.tier)}});
  json merges = json::array();
  for (const auto& m : merges_)
    merges.push_back({{"t", m.t},
                      {"existing", m.existing_id},
                      {"incoming", m.incoming_id},
                      {"residual_before", m.residual_before},
                      {"residual_after", m.residual_after},
                      {"accepted", m.accepted},
                      {"note", m.note}});
  json diags = json::array();
  for (const auto& d : diagnostics_)
    diags.push_back({{"t", d.t},
                     {"start_keyframe", d.start_keyframe},
                     {"end_keyframe", d.end_keyframe},
                     {"cells", d.cells},
                     {"outcome", d.outcome}});
  return {{"config", config_to_json(cfg_)},
          {"loops", loops},
          {"merges", merges},
          {"rooms", diags},
          {"timing", {{"t_fgo", stats_.t_fgo}, {"t_ld", stats_.t_ld}, {"optimizations", stats_.optimizations}}}};
}

PipelineResult run_pipeline(const RunLog& log, const PipelineConfig& cfg) {
  PipelineConfig c = cfg;
  c.sensor_range = log.sensor.max_range;
  Pipeline p(c);
  for (const auto& s : log.steps) p.process(s);
  p.finish();
  return {p.export_json(true), p.report_json()};
}

std::string canonical_export(const json& scene_graph) {
  json copy = scene_graph;
  copy.erase("timing");
  return copy.dump();
}

}  // namespace tacs
