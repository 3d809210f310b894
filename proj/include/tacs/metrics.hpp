#pragma once

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "tacs/geometry.hpp"
#include "tacs/grid.hpp"
#include "tacs/loopclosure.hpp"

namespace tacs {

class MetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RegionMask {
  CellSet cells;
  double resolution = 0.1;

  double area() const { return double(cells.size()) * resolution * resolution; }
};

/// Dice coefficient 2|A∩B| / (|A| + |B|); 0 when both are empty.
double dcs(const RegionMask& a, const RegionMask& b);

struct ConsistencyReport {
  double n_room = 0.0;
  double sigma_room = 0.0;
  double dcs_mean = 0.0;
  double t_fgo = 0.0;
};

/// Rooms of each trial are matched to every other trial greedily by overlap;
/// each trial pair contributes the mean DCS over max(n_i, n_j) slots.
ConsistencyReport consistency(std::span<const std::vector<RegionMask>> trials);

struct StampedPose {
  double t = 0.0;
  Pose2 pose;
};

/// Rigid planar alignment minimizing squared translation error (no scale).
Pose2 align_se2(std::span<const Vec2d> estimate, std::span<const Vec2d> truth);

/// RMSE of translations after alignment; poses are associated by nearest timestamp within `max_dt`.
double ate(std::span<const StampedPose> estimate, std::span<const StampedPose> truth, double max_dt = 0.05);

/// Distance-weighted mean of per-sequence ATEs.
double wate(std::span<const double> ates, std::span<const double> distances);

struct LoopPrecision {
  double value = 1.0;
  bool zero_support = false;
};

/// Fraction of events whose keyframes' true positions lie within `tol`.
LoopPrecision loop_precision(std::span<const LoopEvent> events, std::span<const Vec2d> truth_by_keyframe, double tol);

void write_tum(std::span<const StampedPose> poses, std::ostream& out);
std::vector<StampedPose> read_tum(std::istream& in);

}  // namespace tacs
