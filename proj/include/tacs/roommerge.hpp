#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tacs/factorgraph.hpp"
#include "tacs/roomseg.hpp"

namespace tacs {

struct MergeCandidate {
  int existing = -1;
  int incoming = -1;
  double overlap_ratio = 0.0;
  bool use_x = false, use_y = false;
  double center_gap = 0.0;  // along the compared axes
};

/// |A ∩ B| / min(|A|, |B|); zero when either is empty.
double overlap_ratio(const CellSet& a, const CellSet& b);

/// Axes on which two room types can be compared; false when they share none.
bool merge_axes(RoomType a, RoomType b, bool& use_x, bool& use_y);

std::vector<MergeCandidate> find_merge_candidates(std::span<const RoomNode> rooms, const RoomNode& incoming,
                                                  double overlap_min = 0.3);

/// Baseline rule: nearest compatible room whose centers are within `max_distance` (Euclidean).
std::vector<MergeCandidate> find_center_distance_candidates(std::span<const RoomNode> rooms, const RoomNode& incoming,
                                                            double max_distance = 1.0);

/// Factor-graph variables of a room.
struct RoomVars {
  int center = -1;
  std::array<int, 4> walls{-1, -1, -1, -1};
};

struct MergeFactorSet {
  MergeCenterFactor center;
  std::vector<MergeWallFactor> walls;
};

/// Center factor on the compared axes plus wall-identity factors for every
/// matched wall pair that is not already the same variable. Refuses when a
/// matched pair is not parallel within `parallel_tol`.
std::optional<MergeFactorSet> build_merge_factor(const FactorGraph& graph, const MergeCandidate& candidate,
                                                 const RoomVars& existing, const RoomVars& incoming,
                                                 double parallel_tol, std::string* reason = nullptr,
                                                 double center_information = 100.0,
                                                 double wall_information = 100.0);

/// Norm of the center factor residual.
double merge_residual(const FactorGraph& graph, const MergeFactorSet& factors);

}  // namespace tacs
