#include "tacs/loopclosure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace tacs {

void LoopConfig::validate() const {
  if (!(d_loop_th > 0)) throw std::invalid_argument("loop: d_loop_th must be positive");
  if (!(L_part > 0)) throw std::invalid_argument("loop: L_part must be positive");
  if (!(0 <= S_fine && S_fine < S_coarse && S_coarse <= 1))
    throw std::invalid_argument("loop: thresholds must satisfy 0 <= S_fine < S_coarse <= 1");
  if (min_keyframe_gap < 0) throw std::invalid_argument("loop: min_keyframe_gap must be non-negative");
}

std::string to_string(LoopTier t) { return t == LoopTier::Coarse ? "coarse" : "fine"; }

std::vector<Partition> partition_room(std::span<const KeyframeRef> keyframes, std::span<const Vec2d> extent_points,
                                      double L_part) {
  if (!(L_part > 0)) throw std::invalid_argument("partition_room: L_part must be positive");
  Vec2d lo = Vec2d::Constant(std::numeric_limits<double>::infinity()), hi = -lo;
  auto grow = [&](const Vec2d& p) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  };
  for (const auto& p : extent_points) grow(p);
  if (extent_points.empty())
    for (const auto& k : keyframes) grow(k.position);
  if (!(lo.x() <= hi.x())) return {};

  const int axis = (hi.x() - lo.x()) >= (hi.y() - lo.y()) ? 0 : 1;
  const double a0 = lo(axis), length = hi(axis) - lo(axis);
  const int n = std::max(1, int(std::ceil(length / L_part - 1e-9)));
  std::vector<Partition> parts(n);
  for (int i = 0; i < n; ++i) {
    parts[i].lo = a0 + i * L_part;
    parts[i].hi = std::min(a0 + (i + 1) * L_part, a0 + length);
    parts[i].center = 0.5 * (lo + hi);
    parts[i].center(axis) = 0.5 * (parts[i].lo + parts[i].hi);
  }
  for (const auto& k : keyframes) {
    const double s = k.position(axis) - a0;
    const int idx = std::clamp(int(std::ceil(s / L_part)) - 1, 0, n - 1);
    parts[idx].keyframes.push_back(k.id);
  }
  return parts;
}

std::optional<int> detect_redetection(std::span<const RoomSummary> existing, const RoomSummary& incoming,
                                      double d_loop_th) {
  std::optional<int> best;
  std::size_t best_overlap = 0;
  for (const auto& r : existing) {
    if (r.id == incoming.id || !r.cells || !incoming.cells) continue;
    const std::size_t n = r.cells->intersection_size(*incoming.cells);
    if (n > best_overlap) {
      best_overlap = n;
      best = r.id;
    }
  }
  if (best) return best;
  double best_d = d_loop_th;
  for (const auto& r : existing) {
    if (r.id == incoming.id || r.type != incoming.type) continue;
    const double d = (r.center - incoming.center).norm();
    if (d <= best_d) {
      best_d = d;
      best = r.id;
    }
  }
  return best;
}

std::vector<CandidatePair> candidate_pairs(std::span<const Partition> old_partitions,
                                           std::span<const KeyframeRef> new_keyframes, double L_part,
                                           int min_keyframe_gap) {
  std::vector<CandidatePair> out;
  for (const auto& kf : new_keyframes) {
    std::vector<std::pair<double, int>> by_dist;
    for (std::size_t i = 0; i < old_partitions.size(); ++i)
      by_dist.emplace_back((old_partitions[i].center - kf.position).norm(), int(i));
    std::sort(by_dist.begin(), by_dist.end());
    for (std::size_t k = 0; k < std::min<std::size_t>(2, by_dist.size()); ++k) {
      if (old_partitions.size() > 1 && by_dist[k].first >= L_part) continue;
      const int p = by_dist[k].second;
      for (int old_id : old_partitions[p].keyframes)
        if (kf.id - old_id >= min_keyframe_gap) out.push_back({old_id, kf.id, p});
    }
  }
  return out;
}

PointHash::PointHash(std::span<const Vec2d> points, double cell) : cell_(cell), points_(points.begin(), points.end()) {
  index_.reserve(points_.size());
  for (std::size_t i = 0; i < points_.size(); ++i) index_.emplace_back(cell_of(points_[i], cell_), int(i));
  std::sort(index_.begin(), index_.end());
}

int PointHash::nearest(const Vec2d& q, double radius, double* dist2) const {
  const Cell c = cell_of(q, cell_);
  const int reach = int(std::ceil(radius / cell_));
  int best = -1;
  double best_d2 = radius * radius;
  for (int dx = -reach; dx <= reach; ++dx) {
    const std::pair<Cell, int> key_lo{Cell{c.x + dx, c.y - reach}, std::numeric_limits<int>::min()};
    const std::pair<Cell, int> key_hi{Cell{c.x + dx, c.y + reach}, std::numeric_limits<int>::max()};
    auto it = std::lower_bound(index_.begin(), index_.end(), key_lo);
    for (; it != index_.end() && *it <= key_hi; ++it) {
      const double d2 = (points_[it->second] - q).squaredNorm();
      if (d2 <= best_d2) {
        best_d2 = d2;
        best = it->second;
      }
    }
  }
  if (dist2) *dist2 = best_d2;
  return best;
}

double overlap_score(std::span<const Vec2d> a, std::span<const Vec2d> b, const Pose2& pose, double radius) {
  if (a.empty() || b.empty()) return 0.0;
  std::vector<Vec2d> bt(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) bt[i] = pose * b[i];
  const PointHash ha(a, radius), hb(bt, radius);
  std::size_t nb = 0, na = 0;
  for (const auto& p : bt) nb += ha.nearest(p, radius) >= 0;
  for (const auto& p : a) na += hb.nearest(p, radius) >= 0;
  return 0.5 * (double(nb) / bt.size() + double(na) / a.size());
}

MatchResult match_keyframes(std::span<const Vec2d> a, std::span<const Vec2d> b, const Pose2& initial, int iterations,
                            double inlier_radius) {
  MatchResult res;
  res.relative = initial;
  if (a.size() < 3 || b.size() < 3) return res;

  // correspondence distance shrinks in three stages
  const std::array<double, 3> stages{1.5, 0.6, 0.3};
  const int per_stage = std::max(1, iterations / int(stages.size()));
  Pose2 T = initial;
  int it_total = 0;
  for (double max_d : stages) {
    const PointHash ha(a, max_d);
    for (int it = 0; it < per_stage; ++it, ++it_total) {
      Vec2d ma = Vec2d::Zero(), mb = Vec2d::Zero();
      std::vector<std::pair<Vec2d, Vec2d>> pairs;
      for (const auto& p : b) {
        const Vec2d q = T * p;
        const int j = ha.nearest(q, max_d);
        if (j < 0) continue;
        pairs.emplace_back(a[j], p);
        ma += a[j];
        mb += p;
      }
      if (pairs.size() < 3) {
        if (max_d == stages.front()) return res;  // diverged: no overlap at all
        break;
      }
      ma /= double(pairs.size());
      mb /= double(pairs.size());
      double sxx = 0, sxy = 0;
      for (const auto& [pa, pb] : pairs) {
        const Vec2d qa = pa - ma, qb = pb - mb;
        sxx += qb.dot(qa);
        sxy += qb.x() * qa.y() - qb.y() * qa.x();
      }
      const double theta = std::atan2(sxy, sxx);
      const Vec2d t = ma - rotation(theta) * mb;
      const Pose2 next(t, theta);
      const double step = (next.t - T.t).norm() + std::abs(wrap_angle(next.theta - T.theta));
      T = next;
      if (step < 1e-6) break;
    }
  }
  res.relative = T;
  res.iterations = it_total;
  res.score = overlap_score(a, b, T, inlier_radius);
  const PointHash ha(a, inlier_radius);
  double sse = 0;
  std::size_t n = 0;
  for (const auto& p : b) {
    double d2;
    if (ha.nearest(T * p, inlier_radius, &d2) >= 0) {
      sse += d2;
      ++n;
    }
  }
  res.rmse = n ? std::sqrt(sse / n) : std::numeric_limits<double>::infinity();
  return res;
}

namespace {

bool better(const ScoredCandidate& x, const ScoredCandidate& y) {
  if (x.match.score != y.match.score) return x.match.score > y.match.score;
  return x.match.rmse < y.match.rmse;
}

LoopEvent to_event(const ScoredCandidate& c, LoopTier tier) {
  LoopEvent e;
  e.kf_old = c.pair.kf_old;
  e.kf_new = c.pair.kf_new;
  e.score = c.match.score;
  e.relative = c.match.relative;
  e.tier = tier;
  return e;
}

}  // namespace

std::vector<LoopEvent> coarse_to_fine_select(std::span<const ScoredCandidate> candidates, double S_coarse,
                                             double S_fine) {
  std::map<int, const ScoredCandidate*> per_partition;
  const ScoredCandidate* best_any = nullptr;
  for (const auto& c : candidates) {
    if (!best_any || better(c, *best_any)) best_any = &c;
    if (c.match.score < S_coarse) continue;
    auto& slot = per_partition[c.pair.partition];
    if (!slot || better(c, *slot)) slot = &c;
  }
  std::vector<LoopEvent> out;
  for (const auto& [p, c] : per_partition) out.push_back(to_event(*c, LoopTier::Coarse));
  if (out.empty() && best_any && best_any->match.score >= S_fine) out.push_back(to_event(*best_any, LoopTier::Fine));
  return out;
}

}  // namespace tacs
