#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tacs/geometry.hpp"
#include "tacs/grid.hpp"
#include "tacs/roomseg.hpp"

namespace tacs {

struct LoopConfig {
  double d_loop_th = 5.0;
  double L_part = 10.0;
  double S_coarse = 0.90;
  double S_fine = 0.75;
  int min_keyframe_gap = 10;
  int icp_iterations = 30;
  double inlier_radius = 0.2;
  double fine_information_scale = 0.25;

  void validate() const;
};

enum class LoopTier { Coarse, Fine };
std::string to_string(LoopTier t);

struct LoopEvent {
  int kf_old = -1;
  int kf_new = -1;
  double score = 0.0;
  Pose2 relative;  // pose of kf_new in the frame of kf_old
  LoopTier tier = LoopTier::Coarse;
  int room_id = -1;
  double t = 0.0;
};

struct KeyframeRef {
  int id = -1;
  Vec2d position = Vec2d::Zero();
};

struct Partition {
  Vec2d center = Vec2d::Zero();
  double lo = 0.0, hi = 0.0;  // along the long axis
  std::vector<int> keyframes;
};

/// Cuts the bounding box of `extent_points` along its long axis into segments of
/// length L_part (the last one shorter); a keyframe on a boundary goes to the lower segment.
std::vector<Partition> partition_room(std::span<const KeyframeRef> keyframes, std::span<const Vec2d> extent_points,
                                      double L_part);

struct RoomSummary {
  int id = -1;
  RoomType type = RoomType::FourWall;
  Vec2d center = Vec2d::Zero();
  const CellSet* cells = nullptr;
};

/// Existing room with the largest graph overlap, else the nearest same-type room
/// whose center lies within d_loop_th.
std::optional<int> detect_redetection(std::span<const RoomSummary> existing, const RoomSummary& incoming,
                                      double d_loop_th);

struct CandidatePair {
  int kf_old = -1;
  int kf_new = -1;
  int partition = 0;
};

/// For each new keyframe, old keyframes of the (up to) two nearest partitions
/// whose centers lie within L_part, respecting the keyframe gap.
std::vector<CandidatePair> candidate_pairs(std::span<const Partition> old_partitions,
                                           std::span<const KeyframeRef> new_keyframes, double L_part,
                                           int min_keyframe_gap);

struct MatchResult {
  double score = 0.0;
  Pose2 relative;  // maps points of b into the frame of a
  double rmse = 0.0;
  int iterations = 0;
};

/// Point-to-point ICP of `b` onto `a`, started from `initial`. The score is the
/// fraction of points of both scans with a counterpart within `inlier_radius`.
MatchResult match_keyframes(std::span<const Vec2d> a, std::span<const Vec2d> b, const Pose2& initial,
                            int iterations = 30, double inlier_radius = 0.2);

/// Fraction of points of `b`, mapped by `pose`, with a point of `a` within `radius`, averaged with the reverse.
double overlap_score(std::span<const Vec2d> a, std::span<const Vec2d> b, const Pose2& pose, double radius);

struct ScoredCandidate {
  CandidatePair pair;
  MatchResult match;
};

/// Best candidate per partition scoring at least S_coarse; otherwise the best
/// overall at least S_fine, tagged Fine; otherwise nothing.
std::vector<LoopEvent> coarse_to_fine_select(std::span<const ScoredCandidate> candidates, double S_coarse,
                                             double S_fine);

/// Uniform-grid nearest neighbour lookup over a fixed point set.
class PointHash {
 public:
  PointHash(std::span<const Vec2d> points, double cell);
  /// Index of the nearest point within `radius`, or -1.
  int nearest(const Vec2d& q, double radius, double* dist2 = nullptr) const;

 private:
  double cell_;
  std::vector<Vec2d> points_;
  std::vector<std::pair<Cell, int>> index_;  // sorted by cell
};

}  // namespace tacs
