#include "tacs/evaluate.hpp"

#include <cstdio>
#include <numeric>
#include <sstream>

namespace tacs {

using nlohmann::json;

std::vector<RegionMask> room_masks(const json& sg) {
  std::vector<RegionMask> out;
  const double res = sg.at("resolution").get<double>();
  for (const auto& r : sg.at("rooms")) {
    std::vector<Cell> cells;
    for (const auto& c : r.at("cells")) cells.push_back({c.at(0).get<int>(), c.at(1).get<int>()});
    out.push_back({CellSet(std::move(cells)), res});
  }
  return out;
}

namespace {

Pose2 pose_from(const json& a) { return Pose2(a.at(0).get<double>(), a.at(1).get<double>(), a.at(2).get<double>()); }

}  // namespace

TrialSummary summarize_trial(const json& sg, const World* world, double loop_tol) {
  TrialSummary s;
  s.n_room = int(sg.at("rooms").size());
  std::vector<StampedPose> est, odom, truth;
  std::vector<Vec2d> truth_xy;
  for (const auto& k : sg.at("keyframes")) {
    const double t = k.at("t").get<double>();
    est.push_back({t, pose_from(k.at("pose"))});
    odom.push_back({t, pose_from(k.at("odom_pose"))});
    truth.push_back({t, pose_from(k.at("true_pose"))});
    if (!truth_xy.empty()) s.distance += (truth.back().pose.t - truth_xy.back()).norm();
    truth_xy.push_back(truth.back().pose.t);
  }
  if (est.size() >= 2) {
    s.ate_estimate = ate(est, truth);
    s.ate_odometry = ate(odom, truth);
  }
  std::vector<LoopEvent> events;
  for (const auto& e : sg.at("edges").at("loops")) {
    LoopEvent ev;
    ev.kf_old = e.at("kf_old").get<int>();
    ev.kf_new = e.at("kf_new").get<int>();
    ev.score = e.at("score").get<double>();
    events.push_back(ev);
  }
  s.n_loop = int(events.size());
  s.pr_loop = loop_precision(events, truth_xy, loop_tol);
  if (world) {
    const double res = sg.at("resolution").get<double>();
    CellSet atrium;
    for (const auto& g : world->gt_rooms)
      if (g.type == "atrium") atrium = atrium.united(rasterize_polygon(g.polygon, res));
    for (const auto& m : room_masks(sg)) s.atrium_cells += m.cells.intersection_size(atrium);
  }
  if (auto it = sg.find("timing"); it != sg.end()) {
    s.t_fgo = it->value("t_fgo", 0.0);
    s.t_ld = it->value("t_ld", 0.0);
  }
  return s;
}

Evaluation evaluate_trials(std::span<const json> sgs, const World* world, double loop_tol) {
  Evaluation ev;
  std::vector<std::vector<RegionMask>> masks;
  for (const auto& sg : sgs) {
    ev.trials.push_back(summarize_trial(sg, world, loop_tol));
    masks.push_back(room_masks(sg));
  }
  if (masks.size() >= 2) {
    ev.consistency = consistency(masks);
    double t = 0.0;
    for (const auto& s : ev.trials) t += s.t_fgo;
    ev.consistency->t_fgo = t / double(ev.trials.size());
  }
  return ev;
}

json Evaluation::to_json() const {
  json trials_j = json::array();
  for (const auto& s : trials)
    trials_j.push_back({{"n_room", s.n_room},
                        {"n_loop", s.n_loop},
                        {"pr_loop", s.pr_loop.value},
                        {"pr_loop_zero_support", s.pr_loop.zero_support},
                        {"ate_odometry", s.ate_odometry},
                        {"ate_estimate", s.ate_estimate},
                        {"distance", s.distance},
                        {"atrium_cells", s.atrium_cells},
                        {"t_fgo", s.t_fgo},
                        {"t_ld", s.t_ld}});
  json out{{"trials", trials_j}};
  if (consistency)
    out["consistency"] = {{"n_room", consistency->n_room},
                          {"sigma_room", consistency->sigma_room},
                          {"dcs_mean", consistency->dcs_mean},
                          {"t_fgo", consistency->t_fgo}};
  return out;
}

std::string Evaluation::to_table() const {
  std::ostringstream out;
  char line[160];
  if (consistency) {
    std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %8s\n", "", "N_room", "sigma", "DCS(%)", "t_FGO(s)");
    out << line;
    std::snprintf(line, sizeof line, "%-8s %8.2f %8.3f %8.1f %8.3f\n", "rooms", consistency->n_room,
                  consistency->sigma_room, 100.0 * consistency->dcs_mean, consistency->t_fgo);
    out << line << '\n';
  }
  std::snprintf(line, sizeof line, "%-8s %8s %8s %8s %8s %8s %8s\n", "trial", "ATE_odo", "ATE(m)", "N_loop", "PR_loop",
                "t_LD(s)", "atrium");
  out << line;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& s = trials[i];
    std::snprintf(line, sizeof line, "%-8zu %8.3f %8.3f %8d %8.2f %8.3f %8zu\n", i, s.ate_odometry, s.ate_estimate,
                  s.n_loop, s.pr_loop.value, s.t_ld, s.atrium_cells);
    out << line;
  }
  return out.str();
}

}  // namespace tacs
