#include "tacs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace tacs {

double dcs(const RegionMask& a, const RegionMask& b) {
  if (std::abs(a.resolution - b.resolution) > 1e-12) throw MetricError("dcs: resolution mismatch");
  const double denom = double(a.cells.size() + b.cells.size());
  if (denom == 0) return 0.0;
  return 2.0 * double(a.cells.intersection_size(b.cells)) / denom;
}

namespace {

/// Greedy matching by descending intersection; returns the mean DCS over max(n_a, n_b) slots.
double matched_dcs(const std::vector<RegionMask>& a, const std::vector<RegionMask>& b) {
  const std::size_t slots = std::max(a.size(), b.size());
  if (slots == 0) return 1.0;
  struct Pair {
    std::size_t overlap, i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const std::size_t n = a[i].cells.intersection_size(b[j].cells);
      if (n > 0) pairs.push_back({n, i, j});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) { return x.overlap > y.overlap; });
  std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
  double total = 0.0;
  for (const auto& p : pairs) {
    if (used_a[p.i] || used_b[p.j]) continue;
    used_a[p.i] = used_b[p.j] = 1;
    total += dcs(a[p.i], b[p.j]);
  }
  return total / double(slots);
}

}  // namespace

ConsistencyReport consistency(std::span<const std::vector<RegionMask>> trials) {
  if (trials.size() < 2) throw MetricError("consistency: need at least two trials");
  ConsistencyReport rep;
  std::vector<double> counts;
  for (const auto& t : trials) counts.push_back(double(t.size()));
  rep.n_room = std::accumulate(counts.begin(), counts.end(), 0.0) / counts.size();
  double var = 0.0;
  for (double c : counts) var += (c - rep.n_room) * (c - rep.n_room);
  rep.sigma_room = std::sqrt(var / counts.size());
  double sum = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < trials.size(); ++i)
    for (std::size_t j = i + 1; j < trials.size(); ++j) {
      sum += matched_dcs(trials[i], trials[j]);
      ++n;
    }
  rep.dcs_mean = sum / n;
  return rep;
}

Pose2 align_se2(std::span<const Vec2d> estimate, std::span<const Vec2d> truth) {
  if (estimate.size() != truth.size() || estimate.empty()) throw MetricError("align_se2: size mismatch");
  Vec2d me = Vec2d::Zero(), mt = Vec2d::Zero();
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    me += estimate[i];
    mt += truth[i];
  }
  me /= double(estimate.size());
  mt /= double(truth.size());
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < estimate.size(); ++i) {
    const Vec2d e = estimate[i] - me, g = truth[i] - mt;
    sxx += e.dot(g);
    sxy += e.x() * g.y() - e.y() * g.x();
  }
  const double theta = std::atan2(sxy, sxx);
  return Pose2(mt - rotation(theta) * me, theta);
}

double ate(std::span<const StampedPose> estimate, std::span<const StampedPose> truth, double max_dt) {
  std::vector<Vec2d> e, g;
  std::size_t j = 0;
  for (const auto& p : estimate) {
    while (j + 1 < truth.size() && std::abs(truth[j + 1].t - p.t) <= std::abs(truth[j].t - p.t)) ++j;
    if (j < truth.size() && std::abs(truth[j].t - p.t) <= max_dt) {
      e.push_back(p.pose.t);
      g.push_back(truth[j].pose.t);
    }
  }
  if (e.size() < 2) throw MetricError("ate: fewer than two associated poses");
  const Pose2 T = align_se2(e, g);
  double sse = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) sse += (T * e[i] - g[i]).squaredNorm();
  return std::sqrt(sse / e.size());
}

double wate(std::span<const double> ates, std::span<const double> distances) {
  if (ates.size() != distances.size()) throw MetricError("wate: length mismatch");
  if (ates.empty()) throw MetricError("wate: empty input");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ates.size(); ++i) {
    if (!(distances[i] > 0)) throw MetricError("wate: distances must be positive");
    num += distances[i] * ates[i];
    den += distances[i];
  }
  return num / den;
}

LoopPrecision loop_precision(std::span<const LoopEvent> events, std::span<const Vec2d> truth_by_keyframe, double tol) {
  LoopPrecision out;
  if (events.empty()) {
    out.zero_support = true;
    return out;
  }
  int good = 0;
  for (const auto& e : events) {
    if (e.kf_old < 0 || e.kf_new < 0 || std::size_t(std::max(e.kf_old, e.kf_new)) >= truth_by_keyframe.size())
      throw MetricError("loop_precision: event refers to a keyframe without ground truth");
    good += (truth_by_keyframe[e.kf_old] - truth_by_keyframe[e.kf_new]).norm() <= tol;
  }
  out.value = double(good) / double(events.size());
  return out;
}

void write_tum(std::span<const StampedPose> poses, std::ostream& out) {
  out << std::setprecision(9);
  for (const auto& p : poses) {
    const double h = 0.5 * p.pose.theta;
    out << p.t << ' ' << p.pose.x() << ' ' << p.pose.y() << " 0 0 0 " << std::sin(h) << ' ' << std::cos(h) << '\n';
  }
}

std::vector<StampedPose> read_tum(std::istream& in) {
  std::vector<StampedPose> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    double t, x, y, z, qx, qy, qz, qw;
    if (!(ss >> t >> x >> y >> z >> qx >> qy >> qz >> qw))
      throw MetricError("tum line " + std::to_string(lineno) + ": expected 8 numbers");
    const double yaw = std::atan2(2 * (qw * qz + qx * qy), 1 - 2 * (qy * qy + qz * qz));
    out.push_back({t, Pose2(x, y, yaw)});
  }
  return out;
}

}  // namespace tacs
