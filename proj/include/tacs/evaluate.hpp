#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tacs/metrics.hpp"
#include "tacs/worldsim.hpp"

namespace tacs {

/// Room masks of a scene-graph export.
std::vector<RegionMask> room_masks(const nlohmann::json& scene_graph);

struct TrialSummary {
  int n_room = 0;
  int n_loop = 0;
  LoopPrecision pr_loop;
  double ate_odometry = 0.0;  // keyframe odometry against truth
  double ate_estimate = 0.0;  // optimized keyframes against truth
  double distance = 0.0;      // true travel over keyframes
  /// Room cells lying in ground-truth atrium regions; zero without a world.
  std::size_t atrium_cells = 0;
  double t_fgo = 0.0;
  double t_ld = 0.0;
};

TrialSummary summarize_trial(const nlohmann::json& scene_graph, const World* world, double loop_tol = 1.0);

struct Evaluation {
  std::vector<TrialSummary> trials;
  std::optional<ConsistencyReport> consistency;  // needs two trials
  nlohmann::json to_json() const;
  /// Aligned-column text tables: room consistency and loop closure.
  std::string to_table() const;
};

Evaluation evaluate_trials(std::span<const nlohmann::json> scene_graphs, const World* world, double loop_tol = 1.0);

}  // namespace tacs
