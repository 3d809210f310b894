#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tacs/config.hpp"
#include "tacs/factorgraph.hpp"
#include "tacs/loopclosure.hpp"
#include "tacs/roommerge.hpp"
#include "tacs/roomseg.hpp"
#include "tacs/walls.hpp"
#include "tacs/worldsim.hpp"

namespace tacs {

struct Keyframe {
  int id = -1;
  int var = -1;
  double t = 0.0;
  Pose2 odom;
  Pose2 truth;
  Scan scan;
  std::vector<Vec2d> points;  // body-frame scan hits
  int room = -1;
};

struct WallObservation {
  int keyframe = -1;
  std::vector<Vec2d> inliers;  // body frame
};

struct WallNode {
  int id = -1;
  int var = -1;
  WallCategory category = WallCategory::XPlus;
  std::vector<WallObservation> observations;
  std::pair<double, double> span{0.0, 0.0};
};

/// Inside graph stored relative to the keyframe that produced it, so the
/// room follows later corrections of that keyframe.
struct RoomPart {
  int keyframe = -1;
  std::vector<Vec2d> local;  // cell centers in the keyframe frame
};

struct RoomRecord {
  RoomNode node;
  RoomVars vars;
  std::vector<int> room_wall_factors;
  std::vector<RoomPart> parts;
};

struct MergeEvent {
  double t = 0.0;
  int existing_id = -1;
  int incoming_id = -1;
  double residual_before = 0.0;
  double residual_after = 0.0;
  bool accepted = false;
  std::string note;
};

struct RoomDiagnostic {
  double t = 0.0;
  int start_keyframe = -1, end_keyframe = -1;
  std::size_t cells = 0;
  std::string outcome;
};

struct PipelineStats {
  double t_fgo = 0.0;
  double t_ld = 0.0;
  int optimizations = 0;
};

/// Incremental scene-graph builder: keyframes, walls and rooms over one factor graph.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);

  void process(const RunStep& step);
  /// Adds a closing keyframe if needed and completes any pending room.
  void finish();

  // Building blocks, public for fixtures.
  int add_keyframe(const RunStep& step);
  int add_wall(const Line2<double>& map_line, WallCategory category);
  int add_room(RoomNode node, std::vector<RoomPart> parts);
  void handle_completed_room(const CompletedRoom& room);
  /// Merges `incoming` into `existing` through the merge factor; returns true when accepted.
  bool try_merge(int existing, int incoming);
  void optimize();

  CellSet room_cells(const RoomRecord& r) const;
  void refresh_rooms();
  std::vector<WallSupport> wall_supports() const;
  Pose2 estimate(int keyframe) const;

  const PipelineConfig& config() const { return cfg_; }
  const FactorGraph& graph() const { return graph_; }
  FactorGraph& graph() { return graph_; }
  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  const std::map<int, WallNode>& walls() const { return walls_; }
  const std::map<int, RoomRecord>& rooms() const { return rooms_; }
  std::map<int, RoomRecord>& rooms() { return rooms_; }
  const std::vector<LoopEvent>& loops() const { return loops_; }
  const std::vector<MergeEvent>& merges() const { return merges_; }
  const std::vector<RoomDiagnostic>& diagnostics() const { return diagnostics_; }
  const PipelineStats& stats() const { return stats_; }

  /// Scene graph export. `timing` adds wall-clock statistics, which are not reproducible.
  nlohmann::json export_json(bool timing = true) const;
  nlohmann::json report_json() const;

 private:
  PipelineConfig cfg_;
  FactorGraph graph_;
  std::vector<Keyframe> keyframes_;
  std::map<int, WallNode> walls_;
  std::map<int, RoomRecord> rooms_;
  std::vector<LoopEvent> loops_;
  std::vector<MergeEvent> merges_;
  std::vector<RoomDiagnostic> diagnostics_;
  PipelineStats stats_;
  RoomAccumulator accumulator_;
  std::map<int, RoomPart> pending_parts_;  // by keyframe
  CellSet pending_union_;
  std::optional<RunStep> last_step_;
  bool last_step_was_keyframe_ = false;
  int next_wall_id_ = 0;
  int next_room_id_ = 0;
  double now_ = 0.0;

  void observe_walls(Keyframe& kf);
  void refresh_wall_spans();
  CellSet segment(const Keyframe& kf);
  void add_loop(const LoopEvent& e, const std::string& why);
  void cosg_loop_closure(int old_room, const std::vector<int>& new_keyframes);
  void distance_threshold_loop_closure(int kf);
  std::vector<MergeCandidate> merge_candidates(int room_id) const;
  void merge_step(int room_id, std::vector<MergeCandidate> first);
  void absorb(int room_id, std::vector<RoomPart> parts);
  void apply_merge(int existing, int incoming, const MergeFactorSet& set, const std::vector<int>& factor_ids);
  std::vector<RoomNode> room_nodes() const;
  MatchResult score_pair(int kf_old, int kf_new) const;
};

struct PipelineResult {
  nlohmann::json scene_graph;
  nlohmann::json report;
};

PipelineResult run_pipeline(const RunLog& log, const PipelineConfig& cfg);

/// Scene graph without the timing block, serialized compactly; used for determinism checks.
std::string canonical_export(const nlohmann::json& scene_graph);

}  // namespace tacs
