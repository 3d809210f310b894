#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "tacs/factorgraph.hpp"
#include "tacs/loopclosure.hpp"
#include "tacs/traversability.hpp"
#include "tacs/walls.hpp"

namespace tacs {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Segmentation { Traversability, Euclidean };
enum class MergeRule { Overlap, CenterDistance };
enum class LoopRule { CoSG, DistanceThreshold };

struct PipelineConfig {
  std::uint64_t seed = 0;
  Segmentation segmentation = Segmentation::Traversability;
  MergeRule merge_rule = MergeRule::Overlap;
  LoopRule loop_rule = LoopRule::CoSG;

  RobotModel robot;
  double resolution = 0.1;  // grid cell size, also the room mask resolution
  double score_threshold = 0.5;
  int history_keyframes = 8;
  double window_margin = 2.0;  // meters beyond sensor range
  double sensor_range = 10.0;  // taken from the run log when available

  double lambda = 0.45;
  double segment_radius = 5.0;  // inside graphs are cut to this distance from the robot
  double wall_adjacency_dist = 0.5;
  int min_adjacent = 25;
  int min_inside_graphs = 3;
  double absorb_overlap = 0.6;
  double parallel_tol = deg2rad(10.0);

  RansacParams ransac;
  double assoc_angle = deg2rad(5.0);
  double assoc_offset = 0.3;

  double overlap_min = 0.3;
  double merge_residual_tol = 0.05;
  double center_distance = 1.0;

  LoopConfig loop;
  int max_candidates_per_keyframe = 4;

  OptimizerConfig fgo;

  double keyframe_distance = 1.0;
  double keyframe_angle = deg2rad(30.0);

  double odom_trans_sigma = 0.05;   // m per sqrt(m)
  double odom_rot_sigma = 0.02;     // rad per sqrt(m)
  double plane_angle_sigma = 0.02;  // rad
  double plane_offset_sigma = 0.03; // m
  double loop_trans_sigma = 0.05;
  double loop_rot_sigma = 0.02;
  double room_sigma = 0.05;
  double merge_sigma = 0.1;

  void validate() const;
};

/// Strict parse: unknown keys and type mismatches raise ConfigError naming the key.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const PipelineConfig& c);

std::string to_string(Segmentation s);
std::string to_string(MergeRule r);
std::string to_string(LoopRule r);

}  // namespace tacs
