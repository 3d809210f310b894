#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "tacs/geometry.hpp"

namespace tacs {

enum class VarKind { Pose, Wall, RoomCenter };

/// Pose: (x, y, theta). Wall: (phi, d) of n(phi) . p = d. RoomCenter: (x, y).
struct Variable {
  VarKind kind = VarKind::Pose;
  Eigen::VectorXd value;
  bool fixed = false;

  int dim() const { return kind == VarKind::Pose ? 3 : 2; }
};

Variable pose_variable(const Pose2& p, bool fixed = false);
Variable wall_variable(const Line2<double>& l);
Variable room_variable(const Vec2d& c);

Pose2 as_pose(const Variable& v);
Line2<double> as_line(const Variable& v);
Vec2d as_point(const Variable& v);

struct OdometryFactor {
  int from = -1, to = -1;
  Pose2 measured;
  Mat3d information = Mat3d::Identity();
};

struct LoopClosureFactor {
  int from = -1, to = -1;
  Pose2 measured;
  Mat3d information = Mat3d::Identity();
};

/// Map wall observed from a pose as a body-frame line.
struct PosePlaneFactor {
  int pose = -1, wall = -1;
  Line2<double> measured;
  Mat2d information = Mat2d::Identity();
};

/// Room center at the midpoint of a parallel wall pair along `axis` (0 = x, 1 = y).
struct RoomWallFactor {
  int room = -1, plus = -1, minus = -1;
  int axis = 0;
  double information = 1.0;
};

/// Pulls a re-detected room's center, through its own wall pairs, onto an
/// existing room's center, on every axis the walls constrain.
struct MergeCenterFactor {
  int incoming = -1, existing = -1;
  std::array<int, 4> incoming_walls{-1, -1, -1, -1};  // x+, x-, y+, y-
  bool use_x = true, use_y = false;
  double information = 1.0;
};

/// Identifies a re-detected wall with its existing counterpart.
struct MergeWallFactor {
  int incoming = -1, existing = -1;
  Mat2d information = Mat2d::Identity();
};

using Factor = std::variant<OdometryFactor, PosePlaneFactor, RoomWallFactor, LoopClosureFactor, MergeCenterFactor,
                            MergeWallFactor>;

std::string factor_kind(const Factor& f);
std::vector<int> factor_variables(const Factor& f);
bool is_robust(const Factor& f);

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Linearization {
  Eigen::VectorXd residual;
  std::vector<Eigen::MatrixXd> jacobians;  // one per factor_variables entry
  Eigen::MatrixXd information;
};

struct OptimizerConfig {
  int max_iters = 50;
  double lambda_init = 1e-4;
  double rel_tol = 1e-9;
  double huber_delta = 1.0;
};

struct OptimizerStats {
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  double wall_time = 0.0;
  std::vector<double> accepted_costs;
  /// Variables with a dimension no factor informs; held in place by damping.
  std::vector<int> weak_variables;
};

class FactorGraph {
 public:
  int add_variable(Variable v);
  void remove_variable(int id);
  int add_factor(Factor f);
  void remove_factor(int id);

  bool has_variable(int id) const { return vars_.count(id) != 0; }
  Variable& variable(int id);
  const Variable& variable(int id) const;
  const Factor& factor(int id) const;
  std::vector<int> factors_referencing(int var) const;

  const std::map<int, Variable>& variables() const { return vars_; }
  const std::map<int, Factor>& factors() const { return factors_; }
  std::size_t variable_count() const { return vars_.size(); }
  std::size_t factor_count() const { return factors_.size(); }

  Linearization linearize(const Factor& f) const;
  Eigen::VectorXd residual(const Factor& f) const { return linearize(f).residual; }

  /// Robustified cost; Huber applies to loop and merge factors.
  double cost(double huber_delta = 1.0) const;

  OptimizerStats optimize(const OptimizerConfig& cfg = {});

  void write_g2o(std::ostream& out) const;

 private:
  std::map<int, Variable> vars_;
  std::map<int, Factor> factors_;
  int next_var_ = 0;
  int next_factor_ = 0;
};

}  // namespace tacs
