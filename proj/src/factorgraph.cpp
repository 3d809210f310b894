#include "tacs/factorgraph.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <chrono>
#include <cmath>
#include <ostream>

#include <spdlog/spdlog.h>

namespace tacs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Vec2d unit(double phi) { return {std::cos(phi), std::sin(phi)}; }
Vec2d unit_derivative(double phi) { return {-std::sin(phi), std::cos(phi)}; }

void check_information(const Eigen::MatrixXd& info, const std::string& what) {
  if (!info.isApprox(info.transpose(), 1e-12)) throw GraphError(what + ": information matrix is not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(info);
  if (llt.info() != Eigen::Success) throw GraphError(what + ": information matrix is not positive definite");
}

/// Residual and Jacobians of m^-1 * (a^-1 * b), error vector (x, y, wrapped theta).
Linearization relative_pose(const Pose2& a, const Pose2& b, const Pose2& m, const Mat3d& info) {
  Linearization lin;
  const Mat2d RaT = a.R().transpose();
  const Mat2d RmT = m.R().transpose();
  const Vec2d dt = b.t - a.t;
  const Vec2d t_rel = RaT * dt;
  lin.residual.resize(3);
  lin.residual.head<2>() = RmT * (t_rel - m.t);
  lin.residual(2) = wrap_angle(b.theta - a.theta - m.theta);

  Eigen::MatrixXd Ja = Eigen::MatrixXd::Zero(3, 3), Jb = Eigen::MatrixXd::Zero(3, 3);
  Ja.block<2, 2>(0, 0) = -RmT * RaT;
  Ja.block<2, 1>(0, 2) = RmT * rotation_derivative(a.theta).transpose() * dt;
  Ja(2, 2) = -1;
  Jb.block<2, 2>(0, 0) = RmT * RaT;
  Jb(2, 2) = 1;
  lin.jacobians = {Ja, Jb};
  lin.information = info;
  return lin;
}

double pair_offset(const Line2<double>& plus, const Line2<double>& minus, const Vec2d& c) {
  return 0.5 * (plus.signed_distance(c) - minus.signed_distance(c));
}

}  // namespace

Variable pose_variable(const Pose2& p, bool fixed) { return {VarKind::Pose, p.vector(), fixed}; }
Variable wall_variable(const Line2<double>& l) { return {VarKind::Wall, Eigen::Vector2d(wrap_angle(l.phi), l.d), false}; }
Variable room_variable(const Vec2d& c) { return {VarKind::RoomCenter, c, false}; }

Pose2 as_pose(const Variable& v) { return Pose2(v.value(0), v.value(1), v.value(2)); }
Line2<double> as_line(const Variable& v) { return {v.value(0), v.value(1)}; }
Vec2d as_point(const Variable& v) { return {v.value(0), v.value(1)}; }

std::string factor_kind(const Factor& f) {
  return std::visit(overloaded{[](const OdometryFactor&) { return "odometry"; },
                               [](const PosePlaneFactor&) { return "pose_plane"; },
                               [](const RoomWallFactor&) { return "room_wall"; },
                               [](const LoopClosureFactor&) { return "loop_closure"; },
                               [](const MergeCenterFactor&) { return "merge_center"; },
                               [](const MergeWallFactor&) { return "merge_wall"; }},
                    f);
}

std::vector<int> factor_variables(const Factor& f) {
  return std::visit(
      overloaded{[](const OdometryFactor& o) { return std::vector<int>{o.from, o.to}; },
                 [](const LoopClosureFactor& o) { return std::vector<int>{o.from, o.to}; },
                 [](const PosePlaneFactor& p) { return std::vector<int>{p.pose, p.wall}; },
                 [](const RoomWallFactor& r) { return std::vector<int>{r.room, r.plus, r.minus}; },
                 [](const MergeCenterFactor& m) {
                   std::vector<int> v{m.incoming, m.existing};
                   if (m.use_x) v.insert(v.end(), {m.incoming_walls[0], m.incoming_walls[1]});
                   if (m.use_y) v.insert(v.end(), {m.incoming_walls[2], m.incoming_walls[3]});
                   return v;
                 },
                 [](const MergeWallFactor& m) { return std::vector<int>{m.incoming, m.existing}; }},
      f);
}

bool is_robust(const Factor& f) {
  return std::holds_alternative<LoopClosureFactor>(f) || std::holds_alternative<MergeCenterFactor>(f) ||
         std::holds_alternative<MergeWallFactor>(f);
}

int FactorGraph::add_variable(Variable v) {
  if (v.value.size() != v.dim()) throw GraphError("add_variable: value has the wrong dimension");
  if (v.kind == VarKind::Pose) v.value(2) = wrap_angle(v.value(2));
  if (v.kind == VarKind::Wall) v.value(0) = wrap_angle(v.value(0));
  const int id = next_var_++;
  vars_.emplace(id, std::move(v));
  return id;
}

std::vector<int> FactorGraph::factors_referencing(int var) const {
  std::vector<int> out;
  for (const auto& [id, f] : factors_) {
    const auto vs = factor_variables(f);
    if (std::find(vs.begin(), vs.end(), var) != vs.end()) out.push_back(id);
  }
  return out;
}

void FactorGraph::remove_variable(int id) {
  if (!has_variable(id)) throw GraphError("remove_variable: no variable " + std::to_string(id));
  const auto blocking = factors_referencing(id);
  if (!blocking.empty()) {
    std::string msg = "remove_variable: variable " + std::to_string(id) + " is referenced by factor(s)";
    for (int f : blocking) msg += " " + std::to_string(f) + " (" + factor_kind(factors_.at(f)) + ")";
    throw GraphError(msg);
  }
  vars_.erase(id);
}

int FactorGraph::add_factor(Factor f) {
  const auto vs = factor_variables(f);
  for (int v : vs)
    if (!has_variable(v))
      throw GraphError("add_factor: " + factor_kind(f) + " references missing variable " + std::to_string(v));
  std::visit(overloaded{[&](const OdometryFactor& o) { check_information(o.information, "odometry"); },
                        [&](const LoopClosureFactor& o) { check_information(o.information, "loop_closure"); },
                        [&](const PosePlaneFactor& p) { check_information(p.information, "pose_plane"); },
                        [&](const RoomWallFactor& r) {
                          if (!(r.information > 0)) throw GraphError("room_wall: information must be positive");
                        },
                        [&](const MergeCenterFactor& m) {
                          if (!(m.information > 0)) throw GraphError("merge_center: information must be positive");
                          if (!m.use_x && !m.use_y) throw GraphError("merge_center: no axis selected");
                        },
                        [&](const MergeWallFactor& m) { check_information(m.information, "merge_wall"); }},
             f);
  const int id = next_factor_++;
  factors_.emplace(id, std::move(f));
  return id;
}

void FactorGraph::remove_factor(int id) {
  if (factors_.erase(id) == 0) throw GraphError("remove_factor: no factor " + std::to_string(id));
}

Variable& FactorGraph::variable(int id) {
  auto it = vars_.find(id);
  if (it == vars_.end()) throw GraphError("no variable " + std::to_string(id));
  return it->second;
}

const Variable& FactorGraph::variable(int id) const {
  auto it = vars_.find(id);
  if (it == vars_.end()) throw GraphError("no variable " + std::to_string(id));
  return it->second;
}

const Factor& FactorGraph::factor(int id) const {
  auto it = factors_.find(id);
  if (it == factors_.end()) throw GraphError("no factor " + std::to_string(id));
  return it->second;
}

Linearization FactorGraph::linearize(const Factor& factor) const {
  return std::visit(
      overloaded{
          [&](const OdometryFactor& o) {
            return relative_pose(as_pose(variable(o.from)), as_pose(variable(o.to)), o.measured, o.information);
          },
          [&](const LoopClosureFactor& o) {
            return relative_pose(as_pose(variable(o.from)), as_pose(variable(o.to)), o.measured, o.information);
          },
          [&](const PosePlaneFactor& p) {
            const Pose2 x = as_pose(variable(p.pose));
            const Line2<double> w = as_line(variable(p.wall));
            const Vec2d n = unit(w.phi);
            Linearization lin;
            lin.residual.resize(2);
            lin.residual << wrap_angle(w.phi - x.theta - p.measured.phi), w.d - n.dot(x.t) - p.measured.d;
            Eigen::MatrixXd Jx = Eigen::MatrixXd::Zero(2, 3), Jw = Eigen::MatrixXd::Zero(2, 2);
            Jx(0, 2) = -1;
            Jx.block<1, 2>(1, 0) = -n.transpose();
            Jw(0, 0) = 1;
            Jw(1, 0) = -unit_derivative(w.phi).dot(x.t);
            Jw(1, 1) = 1;
            lin.jacobians = {Jx, Jw};
            lin.information = p.information;
            return lin;
          },
          [&](const RoomWallFactor& r) {
            const Vec2d c = as_point(variable(r.room));
            const Line2<double> wp = as_line(variable(r.plus)), wm = as_line(variable(r.minus));
            Linearization lin;
            lin.residual = Eigen::VectorXd::Constant(1, pair_offset(wp, wm, c));
            Eigen::MatrixXd Jc(1, 2), Jp(1, 2), Jm(1, 2);
            Jc = 0.5 * (unit(wp.phi) - unit(wm.phi)).transpose();
            Jp << 0.5 * unit_derivative(wp.phi).dot(c), -0.5;
            Jm << -0.5 * unit_derivative(wm.phi).dot(c), 0.5;
            lin.jacobians = {Jc, Jp, Jm};
            lin.information = Eigen::MatrixXd::Constant(1, 1, r.information);
            return lin;
          },
          [&](const MergeCenterFactor& m) {
            const Vec2d ci = as_point(variable(m.incoming)), ce = as_point(variable(m.existing));
            const int rows = int(m.use_x) + int(m.use_y);
            Linearization lin;
            lin.residual.resize(rows);
            Eigen::MatrixXd Ji = Eigen::MatrixXd::Zero(rows, 2), Je = Eigen::MatrixXd::Zero(rows, 2);
            std::vector<Eigen::MatrixXd> wall_jac;
            int row = 0;
            for (int axis = 0; axis < 2; ++axis) {
              if ((axis == 0 && !m.use_x) || (axis == 1 && !m.use_y)) continue;
              const Line2<double> wp = as_line(variable(m.incoming_walls[2 * axis]));
              const Line2<double> wm = as_line(variable(m.incoming_walls[2 * axis + 1]));
              const double s = pair_offset(wp, wm, ci);
              lin.residual(row) = ci(axis) - 0.5 * s - ce(axis);
              Ji.row(row) = -0.25 * (unit(wp.phi) - unit(wm.phi)).transpose();
              Ji(row, axis) += 1.0;
              Je(row, axis) = -1.0;
              Eigen::MatrixXd Jp = Eigen::MatrixXd::Zero(rows, 2), Jm = Eigen::MatrixXd::Zero(rows, 2);
              Jp.row(row) << -0.25 * unit_derivative(wp.phi).dot(ci), 0.25;
              Jm.row(row) << 0.25 * unit_derivative(wm.phi).dot(ci), -0.25;
              wall_jac.push_back(Jp);
              wall_jac.push_back(Jm);
              ++row;
            }
            lin.jacobians = {Ji, Je};
            lin.jacobians.insert(lin.jacobians.end(), wall_jac.begin(), wall_jac.end());
            lin.information = Eigen::MatrixXd::Identity(rows, rows) * m.information;
            return lin;
          },
          [&](const MergeWallFactor& m) {
            const Line2<double> wi = as_line(variable(m.incoming)), we = as_line(variable(m.existing));
            Linearization lin;
            lin.residual.resize(2);
            lin.residual << wrap_angle(wi.phi - we.phi), wi.d - we.d;
            lin.jacobians = {Eigen::MatrixXd::Identity(2, 2), -Eigen::MatrixXd::Identity(2, 2)};
            lin.information = m.information;
            return lin;
          }},
      factor);
}

namespace {

/// Huber on the whitened norm: returns (rho, weight) with rho = e^2 inside the band.
std::pair<double, double> huber(double e2, double delta) {
  if (e2 <= delta * delta) return {e2, 1.0};
  const double e = std::sqrt(e2);
  return {2 * delta * e - delta * delta, delta / e};
}

}  // namespace

double FactorGraph::cost(double huber_delta) const {
  double total = 0.0;
  for (const auto& [id, f] : factors_) {
    const auto lin = linearize(f);
    const double e2 = lin.residual.dot(lin.information * lin.residual);
    total += is_robust(f) ? huber(e2, huber_delta).first : e2;
  }
  return total;
}

OptimizerStats FactorGraph::optimize(const OptimizerConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  OptimizerStats stats;

  std::map<int, int> offset;
  int n = 0;
  for (const auto& [id, v] : vars_) {
    if (v.fixed) continue;
    offset[id] = n;
    n += v.dim();
  }
  stats.initial_cost = stats.final_cost = cost(cfg.huber_delta);
  if (n == 0 || factors_.empty()) {
    stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return stats;
  }

  auto apply = [&](const Eigen::VectorXd& dx) {
    for (const auto& [id, off] : offset) {
      auto& v = vars_.at(id);
      v.value += dx.segment(off, v.dim());
      if (v.kind == VarKind::Pose) v.value(2) = wrap_angle(v.value(2));
      if (v.kind == VarKind::Wall) v.value(0) = wrap_angle(v.value(0));
    }
  };

  double lambda = cfg.lambda_init;
  double current = stats.initial_cost;
  bool weak_reported = false;
  for (int iter = 0; iter < cfg.max_iters; ++iter) {
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    for (const auto& [fid, f] : factors_) {
      const auto vars = factor_variables(f);
      const auto lin = linearize(f);
      double w = 1.0;
      if (is_robust(f)) w = huber(lin.residual.dot(lin.information * lin.residual), cfg.huber_delta).second;
      const Eigen::MatrixXd W = w * lin.information;
      for (std::size_t a = 0; a < vars.size(); ++a) {
        auto ia = offset.find(vars[a]);
        if (ia == offset.end()) continue;
        const Eigen::MatrixXd JaW = lin.jacobians[a].transpose() * W;
        g.segment(ia->second, JaW.rows()) += JaW * lin.residual;
        for (std::size_t b = 0; b < vars.size(); ++b) {
          auto ib = offset.find(vars[b]);
          if (ib == offset.end()) continue;
          const Eigen::MatrixXd block = JaW * lin.jacobians[b];
          for (int r = 0; r < block.rows(); ++r)
            for (int c = 0; c < block.cols(); ++c)
              if (block(r, c) != 0.0) trip.emplace_back(ia->second + r, ib->second + c, block(r, c));
        }
      }
    }
    Eigen::SparseMatrix<double> H(n, n);
    H.setFromTriplets(trip.begin(), trip.end());
    const Eigen::VectorXd diag = H.diagonal();
    if (!weak_reported) {
      for (const auto& [id, off] : offset)
        for (int k = 0; k < vars_.at(id).dim(); ++k)
          if (diag(off + k) <= 0.0) {
            stats.weak_variables.push_back(id);
            break;
          }
      weak_reported = true;
    }

    bool accepted = false;
    for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
      Eigen::SparseMatrix<double> A = H;
      for (int k = 0; k < n; ++k) A.coeffRef(k, k) += lambda * std::max(diag(k), 1e-6);
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
      if (solver.info() != Eigen::Success) {
        lambda *= 10;
        continue;
      }
      const Eigen::VectorXd dx = solver.solve(-g);
      if (solver.info() != Eigen::Success || !dx.allFinite()) {
        lambda *= 10;
        continue;
      }
      const auto backup = vars_;
      apply(dx);
      const double trial = cost(cfg.huber_delta);
      if (trial <= current) {
        accepted = true;
        lambda = std::max(lambda / 10, 1e-12);
        const double rel = current > 0 ? (current - trial) / current : 0.0;
        current = trial;
        stats.accepted_costs.push_back(trial);
        stats.iterations = iter + 1;
        if (rel < cfg.rel_tol) {
          stats.final_cost = current;
          stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
          return stats;
        }
      } else {
        vars_ = backup;
        lambda *= 10;
      }
    }
    if (!accepted) break;
  }
  stats.final_cost = current;
  stats.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  spdlog::debug("optimize: {} iterations, cost {:.6g} -> {:.6g}", stats.iterations, stats.initial_cost,
                stats.final_cost);
  return stats;
}

void FactorGraph::write_g2o(std::ostream& out) const {
  for (const auto& [id, v] : vars_) {
    switch (v.kind) {
      case VarKind::Pose: out << "VERTEX_SE2 " << id << ' ' << v.value(0) << ' ' << v.value(1) << ' ' << v.value(2); break;
      case VarKind::Wall: out << "VERTEX_WALL2 " << id << ' ' << v.value(0) << ' ' << v.value(1); break;
      case VarKind::RoomCenter: out << "VERTEX_ROOM2 " << id << ' ' << v.value(0) << ' ' << v.value(1); break;
    }
    out << '\n';
    if (v.fixed) out << "FIX " << id << '\n';
  }
  auto upper = [&](const Eigen::MatrixXd& m) {
    for (int r = 0; r < m.rows(); ++r)
      for (int c = r; c < m.cols(); ++c) out << ' ' << m(r, c);
  };
  for (const auto& [id, f] : factors_) {
    std::visit(overloaded{[&](const OdometryFactor& o) {
                            out << "EDGE_SE2 " << o.from << ' ' << o.to << ' ' << o.measured.x() << ' '
                                << o.measured.y() << ' ' << o.measured.theta;
                            upper(o.information);
                          },
                          [&](const LoopClosureFactor& o) {
                            out << "EDGE_SE2_LOOP " << o.from << ' ' << o.to << ' ' << o.measured.x() << ' '
                                << o.measured.y() << ' ' << o.measured.theta;
                            upper(o.information);
                          },
                          [&](const PosePlaneFactor& p) {
                            out << "EDGE_SE2_WALL2 " << p.pose << ' ' << p.wall << ' ' << p.measured.phi << ' '
                                << p.measured.d;
                            upper(p.information);
                          },
                          [&](const RoomWallFactor& r) {
                            out << "EDGE_ROOM_WALLS " << r.room << ' ' << r.plus << ' ' << r.minus << ' ' << r.axis
                                << ' ' << r.information;
                          },
                          [&](const MergeCenterFactor& m) {
                            out << "EDGE_ROOM_MERGE " << m.incoming << ' ' << m.existing;
                            for (int w : m.incoming_walls) out << ' ' << w;
                            out << ' ' << m.use_x << ' ' << m.use_y << ' ' << m.information;
                          },
                          [&](const MergeWallFactor& m) {
                            out << "EDGE_WALL_MERGE " << m.incoming << ' ' << m.existing;
                            upper(m.information);
                          }},
               f);
    out << '\n';
  }
}

}  // namespace tacs
