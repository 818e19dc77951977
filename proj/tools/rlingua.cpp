// rlingua: train, render and inspect runs.
//
//   rlingua run --task reach --arm rlingua --seeds 1,2 --steps 20000 --out runs
//   rlingua render runs/reach-rlingua runs/reach-td3 -o reach.svg
//   rlingua trajectory --task push --seed 3

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "rlingua/experiment.hpp"

namespace fs = std::filesystem;
using namespace rlingua;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRun = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Directories expand to every seed-*/metrics.csv below them, sorted.
std::vector<fs::path> collect_metric_files(const std::vector<std::string>& inputs) {
  std::vector<fs::path> files;
  for (const auto& in : inputs) {
    if (!fs::is_directory(in)) {
      files.emplace_back(in);
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(in)) {
      if (e.is_regular_file() && e.path().filename() == "metrics.csv") found.push_back(e.path());
    }
    if (found.empty()) files.emplace_back(fs::path(in) / "metrics.csv");  // reported as missing
    std::sort(found.begin(), found.end());
    files.insert(files.end(), found.begin(), found.end());
  }
  return files;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Controller-guided TD3 on kinematic manipulation tasks"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "train one arm over several seeds");
  std::string config_path, task, arm, seeds, out;
  std::optional<std::uint64_t> steps;
  std::vector<std::string> overrides;
  int jobs = 1;
  bool print_config = false;
  run->add_option("--config", config_path, "config file");
  run->add_option("--task", task, "reach, push, slide, pick_and_place, pick_and_place_6d");
  run->add_option("--arm", arm, "rlingua, td3 or controller");
  run->add_option("--seeds", seeds, "comma-separated seed list");
  run->add_option("--steps", steps, "total environment steps per seed");
  run->add_option("--out", out, "output root (default $RLINGUA_OUT, else ./runs)");
  run->add_option("--override", overrides, "section.key=value, repeatable");
  run->add_option("--jobs", jobs, "seeds trained concurrently")->check(CLI::PositiveNumber);
  run->add_flag("--print-config", print_config, "print the effective config and exit");

  // render
  auto* render = app.add_subcommand("render", "draw EMA success curves as SVG");
  std::vector<std::string> inputs;
  std::string svg_path = "curves.svg";
  render->add_option("inputs", inputs, "metrics.csv files or run directories")->required();
  render->add_option("-o,--output", svg_path, "SVG file to write");

  // trajectory
  auto* traj = app.add_subcommand("trajectory", "dump one controller episode");
  std::string traj_task = "reach";
  std::uint64_t traj_seed = 1;
  double traj_noise = 0.0;
  std::string traj_variant = "corrected";
  traj->add_option("--task", traj_task, "task id");
  traj->add_option("--seed", traj_seed, "episode seed");
  traj->add_option("--noise", traj_noise, "controller noise sigma");
  traj->add_option("--variant", traj_variant, "pick-and-place variant: corrected or first_round");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*render) {
    try {
      render_curves(collect_metric_files(inputs), svg_path);
    } catch (const std::exception& e) {
      std::cerr << e.what();
      return kExitRun;
    }
    std::cout << "wrote " << svg_path << "\n";
    return 0;
  }

  if (*traj) {
    try {
      const TaskId id = parse_task(traj_task);
      ControllerOptions opts;
      opts.noise_sigma = traj_noise;
      opts.seed = traj_seed;
      if (traj_variant == "first_round") {
        opts.variant = PickPlaceVariant::first_round;
      } else if (traj_variant != "corrected") {
        throw std::invalid_argument("unknown variant " + traj_variant);
      }
      auto ctrl = make_controller(id, opts);
      Env env(id);
      GoalObservation obs = env.reset(traj_seed);
      for (int step = 0; step < env.spec().max_episode_steps; ++step) {
        const auto action = ctrl->act(obs);
        const auto r = env.step(action);
        write_trajectory_record(std::cout, step, env.state(), action, r.reward);
        obs = r.observation;
        if (r.terminal || r.truncated) break;
      }
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kExitConfig;
    }
    return 0;
  }

  ExperimentConfig config;
  try {
    ConfigBuilder b;
    if (!config_path.empty()) b.parse(read_file(config_path), config_path);
    if (!task.empty()) b.set("experiment", "task", task);
    if (!arm.empty()) b.set("experiment", "arm", arm);
    if (!seeds.empty()) b.set("experiment", "seeds", seeds);
    if (steps) b.set("experiment", "total_steps", std::to_string(*steps));
    if (!out.empty()) b.set("experiment", "out_dir", out);
    for (const auto& o : overrides) b.apply_override(o);
    config = b.build();
    if (config.out_dir.empty()) {
      const char* env_out = std::getenv("RLINGUA_OUT");
      config.out_dir = env_out && *env_out ? env_out : "runs";
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  if (print_config) {
    std::cout << serialize_config(config);
    return 0;
  }

  try {
    RunOptions opts;
    opts.jobs = jobs;
    opts.log = &std::cerr;
    const RunResult result = run_experiment(config, opts);
    std::cout << result.dir.string() << "\n";
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return kExitRun;
  }
  return 0;
}
