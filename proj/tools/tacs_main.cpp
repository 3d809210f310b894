// tacs: world generation, simulation, scene-graph building and evaluation.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "tacs/config.hpp"
#include "tacs/evaluate.hpp"
#include "tacs/pipeline.hpp"
#include "tacs/worldsim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tacs;

namespace {

constexpr int kSchemaError = 2;
constexpr int kPipelineError = 3;

/// Input that does not parse or validate.
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

template <typename F>
auto parse_input(const std::string& path, F&& fn) {
  try {
    return fn();
  } catch (const SchemaError&) {
    throw;
  } catch (const std::exception& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot write");
  out << j.dump(2) << '\n';
}

World load_world(const std::string& path) {
  const json j = load_json(path);
  return parse_input(path, [&] { return world_from_json(j); });
}

std::vector<Pose2> load_trajectory(const std::string& path, const World& world) {
  if (path.empty()) return tour_to_waypoints(world.suggested_tour);
  const json j = load_json(path);
  return parse_input(path, [&] { return trajectory_from_json(j); });
}

NoiseModel load_noise(const std::string& path) {
  if (path.empty()) return {};
  const json j = load_json(path);
  return parse_input(path, [&] { return j.get<NoiseModel>(); });
}

SensorModel load_sensor(const std::string& path) {
  if (path.empty()) return {};
  const json j = load_json(path);
  return parse_input(path, [&] { return j.get<SensorModel>(); });
}

PipelineConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  const json j = load_json(path);
  return parse_input(path, [&] { return config_from_json(j); });
}

RunLog load_runlog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path + ": cannot open file");
  return parse_input(path, [&] { return read_runlog(in); });
}

void configure_logging() {
  const char* env = std::getenv("TACS_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Traversability-aware scene graphs: simulate, build and evaluate"};
  app.require_subcommand(1);

  std::string spec_file, world_file, traj_file, noise_file, sensor_file, config_file, runlog_file, out_file,
      report_file, tum_file, out_dir;
  std::uint64_t seed = 0;
  std::vector<std::string> graph_files;
  std::vector<std::uint64_t> seeds;
  bool table = false;
  double loop_tol = 1.0;

  auto* gen = app.add_subcommand("gen-world", "Generate a world from a layout spec");
  gen->add_option("spec", spec_file, "World spec JSON")->required();
  gen->add_option("--seed", seed, "Layout seed");
  gen->add_option("--out", out_file, "Output world file (stdout if omitted)");

  auto* sim = app.add_subcommand("simulate", "Simulate a run along a trajectory");
  sim->add_option("world", world_file, "World file")->required();
  sim->add_option("trajectory", traj_file, "Trajectory JSON (default: the world's suggested tour)");
  sim->add_option("--noise", noise_file, "Odometry noise JSON");
  sim->add_option("--sensor", sensor_file, "Sensor model JSON");
  sim->add_option("--seed", seed, "Noise seed");
  sim->add_option("--out", out_file, "Output run log (JSONL)")->required();

  auto* build = app.add_subcommand("build-graph", "Build a scene graph from a run log");
  build->add_option("runlog", runlog_file, "Run log (JSONL)")->required();
  build->add_option("--config", config_file, "Pipeline config JSON");
  build->add_option("--seed", seed, "Overrides the config seed");
  build->add_option("--out", out_file, "Scene graph output")->required();
  build->add_option("--report", report_file, "Run report output");
  build->add_option("--tum", tum_file, "Optimized keyframe trajectory in TUM format");

  auto* eval = app.add_subcommand("evaluate", "Consistency and loop metrics over repeated trials");
  eval->add_option("graphs", graph_files, "Scene graph files, one per trial")->required();
  eval->add_option("--world", world_file, "World file (enables atrium overlap counts)");
  eval->add_option("--loop-tol", loop_tol, "True-position tolerance for loop precision (m)");
  eval->add_option("--out", out_file, "Evaluation JSON output");
  eval->add_flag("--table", table, "Print aligned text tables");

  auto* trials = app.add_subcommand("trials", "Simulate, build and evaluate over several seeds");
  trials->add_option("world", world_file, "World file")->required();
  trials->add_option("trajectory", traj_file, "Trajectory JSON (default: the world's suggested tour)");
  trials->add_option("--config", config_file, "Pipeline config JSON");
  trials->add_option("--noise", noise_file, "Odometry noise JSON");
  trials->add_option("--sensor", sensor_file, "Sensor model JSON");
  trials->add_option("--seeds", seeds, "Trial seeds")->required();
  trials->add_option("--out-dir", out_dir, "Directory for per-trial outputs")->required();
  trials->add_flag("--table", table, "Print aligned text tables");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help exits 0; a malformed command line counts as invalid input
    return app.exit(e) == 0 ? 0 : kSchemaError;
  }

  try {
    if (*gen) {
      const json j = load_json(spec_file);
      const WorldSpec spec = parse_input(spec_file, [&] { return j.get<WorldSpec>(); });
      World w;
      try {
        w = generate_world(spec, seed);
      } catch (const WorldError& e) {
        throw SchemaError(spec_file + ": " + e.what());
      }
      write_json(out_file, world_to_json(w));
    } else if (*sim) {
      const World w = load_world(world_file);
      const auto traj = load_trajectory(traj_file, w);
      const RunLog log = simulate_run(w, traj, load_sensor(sensor_file), load_noise(noise_file), seed);
      std::ofstream out(out_file);
      if (!out) throw std::runtime_error(out_file + ": cannot write");
      write_runlog(log, out);
    } else if (*build) {
      PipelineConfig cfg = load_config(config_file);
      if (build->count("--seed")) cfg.seed = seed;
      const RunLog log = load_runlog(runlog_file);
      const PipelineResult r = run_pipeline(log, cfg);
      write_json(out_file, r.scene_graph);
      if (!report_file.empty()) write_json(report_file, r.report);
      if (!tum_file.empty()) {
        std::vector<StampedPose> poses;
        for (const auto& k : r.scene_graph.at("keyframes")) {
          const auto& p = k.at("pose");
          poses.push_back({k.at("t").get<double>(), Pose2(p[0].get<double>(), p[1].get<double>(), p[2].get<double>())});
        }
        std::ofstream out(tum_file);
        write_tum(poses, out);
      }
    } else if (*eval) {
      std::vector<json> graphs;
      for (const auto& f : graph_files) graphs.push_back(load_json(f));
      std::optional<World> w;
      if (!world_file.empty()) w = load_world(world_file);
      const Evaluation ev = evaluate_trials(graphs, w ? &*w : nullptr, loop_tol);
      if (!out_file.empty()) write_json(out_file, ev.to_json());
      if (table || out_file.empty()) std::cout << ev.to_table();
    } else if (*trials) {
      const World w = load_world(world_file);
      const auto traj = load_trajectory(traj_file, w);
      const PipelineConfig base = load_config(config_file);
      const NoiseModel noise = load_noise(noise_file);
      const SensorModel sensor = load_sensor(sensor_file);
      fs::create_directories(out_dir);
      std::vector<json> graphs;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        const RunLog log = simulate_run(w, traj, sensor, noise, seeds[i]);
        const std::string stem = (fs::path(out_dir) / ("trial_" + std::to_string(i))).string();
        std::ofstream rl(stem + ".runlog.jsonl");
        write_runlog(log, rl);
        PipelineConfig cfg = base;
        cfg.seed = seeds[i];
        const PipelineResult r = run_pipeline(log, cfg);
        write_json(stem + ".graph.json", r.scene_graph);
        write_json(stem + ".report.json", r.report);
        graphs.push_back(r.scene_graph);
        spdlog::info("trial {} (seed {}): {} rooms, {} loops", i, seeds[i], r.scene_graph["rooms"].size(),
                     r.scene_graph["edges"]["loops"].size());
      }
      const Evaluation ev = evaluate_trials(graphs, &w);
      write_json((fs::path(out_dir) / "evaluation.json").string(), ev.to_json());
      if (table) std::cout << ev.to_table();
    }
  } catch (const SchemaError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSchemaError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPipelineError;
  }
  return 0;
}
