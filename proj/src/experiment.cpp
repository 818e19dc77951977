#include "rlingua/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace rlingua {

namespace fs = std::filesystem;

SeedSummary summarize(std::uint64_t seed, const std::vector<MetricRow>& rows, double target) {
  SeedSummary s;
  s.seed = seed;
  if (rows.empty()) return s;
  s.final_ema = rows.back().ema_success;
  s.final_raw = rows.back().raw_success;
  for (const auto& r : rows) s.best_ema = std::max(s.best_ema, r.ema_success);
  s.steps_to_target = steps_to_success(rows, target);
  return s;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw RunError("cannot write " + path.string());
}

nlohmann::json summary_json(const ExperimentConfig& config, const std::vector<SeedSummary>& seeds,
                            bool complete) {
  nlohmann::json j;
  j["task"] = std::string(task_name(config.trainer.task));
  j["arm"] = std::string(arm_name(config.trainer.arm));
  j["total_steps"] = config.trainer.total_steps;
  j["success_target"] = config.trainer.success_target;
  j["complete"] = complete;
  j["seeds"] = nlohmann::json::array();
  double final_sum = 0.0;
  for (const auto& s : seeds) {
    nlohmann::json e;
    e["seed"] = s.seed;
    e["final_ema"] = s.final_ema;
    e["best_ema"] = s.best_ema;
    e["final_raw"] = s.final_raw;
    e["steps_to_target"] =
        s.steps_to_target ? nlohmann::json(*s.steps_to_target) : nlohmann::json(nullptr);
    e["llm_actions"] = s.llm_actions;
    j["seeds"].push_back(e);
    final_sum += s.final_ema;
  }
  j["mean_final_ema"] = seeds.empty() ? 0.0 : final_sum / static_cast<double>(seeds.size());
  return j;
}

struct SeedOutcome {
  std::vector<MetricRow> rows;
  SeedSummary summary;
  std::string error;
};

SeedOutcome run_seed(const ExperimentConfig& config, std::uint64_t seed, const fs::path& dir) {
  SeedOutcome out;
  const fs::path seed_dir = dir / ("seed-" + std::to_string(seed));
  fs::create_directories(seed_dir);
  std::optional<Trainer> trainer;
  try {
    trainer.emplace(config.trainer, seed);
    trainer->run();
  } catch (const std::exception& e) {
    out.error = "seed " + std::to_string(seed) + ": " + e.what();
  }
  if (trainer) out.rows = trainer->metrics();

  std::ofstream metrics(seed_dir / "metrics.csv", std::ios::binary);
  write_metrics_csv(metrics,
                    {std::string(arm_name(config.trainer.arm)),
                     std::string(task_name(config.trainer.task)), seed},
                    out.rows);
  if (!metrics && out.error.empty()) out.error = "seed " + std::to_string(seed) + ": metrics write";

  if (trainer && out.error.empty() && config.trainer.arm != Arm::controller) {
    std::ofstream ckpt(seed_dir / "agent.ckpt", std::ios::binary);
    trainer->agent().write(ckpt);
    if (!ckpt) out.error = "seed " + std::to_string(seed) + ": checkpoint write";
  }
  out.summary = summarize(seed, out.rows, config.trainer.success_target);
  if (trainer) out.summary.llm_actions = trainer->llm_actions();
  return out;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  try {
    config.trainer.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (config.seeds.empty()) throw ConfigError("no seeds");

  RunResult result;
  const fs::path root = config.out_dir.empty() ? fs::path("runs") : fs::path(config.out_dir);
  result.dir = root / (std::string(task_name(config.trainer.task)) + "-" +
                       std::string(arm_name(config.trainer.arm)));
  std::error_code ec;
  fs::create_directories(result.dir, ec);
  if (ec) throw RunError("cannot create " + result.dir.string() + ": " + ec.message());

  const fs::path marker = result.dir / "INCOMPLETE";
  write_text(marker, "run started\n");
  write_text(result.dir / "config.ini", serialize_config(config));

  std::vector<SeedOutcome> outcomes(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        outcomes[i] = run_seed(config, config.seeds[i], result.dir);
      } catch (const std::exception& e) {
        outcomes[i].error = "seed " + std::to_string(config.seeds[i]) + ": " + e.what();
      }
      if (options.log) {
        std::lock_guard lock(log_mutex);
        const auto& s = outcomes[i].summary;
        *options.log << result.dir.filename().string() << " seed " << config.seeds[i]
                     << (outcomes[i].error.empty() ? " done" : " FAILED") << ": final_ema="
                     << format_double(s.final_ema) << " best_ema=" << format_double(s.best_ema)
                     << " steps_to_target="
                     << (s.steps_to_target ? std::to_string(*s.steps_to_target) : "none") << "\n";
      }
    }
  };
  const int jobs = std::clamp<int>(options.jobs, 1, static_cast<int>(config.seeds.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::string errors;
  for (auto& o : outcomes) {
    result.seeds.push_back(o.summary);
    result.curves.push_back(std::move(o.rows));
    if (!o.error.empty()) errors += o.error + "\n";
  }
  write_text(result.dir / "summary.json",
             summary_json(config, result.seeds, errors.empty()).dump(2) + "\n");
  if (!errors.empty()) {
    write_text(marker, errors);
    throw RunError(errors);
  }
  fs::remove(marker);
  return result;
}

// ---------------------------------------------------------------------------
// SVG rendering

namespace {

constexpr double kWidth = 720, kHeight = 440;
constexpr double kLeft = 64, kRight = 150, kTop = 24, kBottom = 52;

const char* arm_color(const std::string& arm) {
  if (arm == "rlingua") return "#d62728";
  if (arm == "td3") return "#1f77b4";
  if (arm == "controller") return "#2ca02c";
  return "#7f7f7f";
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(std::uint64_t steps) {
  if (steps >= 1'000'000 && steps % 100'000 == 0) return format_double(steps / 1e6) + "M";
  if (steps >= 1000 && steps % 100 == 0) return format_double(steps / 1e3) + "k";
  return std::to_string(steps);
}

}  // namespace

std::string render_curves_svg(const std::vector<fs::path>& metric_files) {
  if (metric_files.empty()) throw std::runtime_error("render: no metrics files given");

  std::map<std::string, std::vector<std::vector<MetricRow>>> by_arm;
  std::string task;
  std::string problems;
  for (const auto& path : metric_files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      problems += "  " + path.string() + ": cannot open\n";
      continue;
    }
    try {
      MetricsHeader header;
      auto rows = read_metrics_csv(in, &header);
      if (rows.empty()) throw std::runtime_error("no rows");
      if (task.empty()) task = header.task;
      by_arm[header.arm].push_back(std::move(rows));
    } catch (const std::exception& e) {
      problems += "  " + path.string() + ": " + e.what() + "\n";
    }
  }
  std::map<std::string, EvalReport> reports;
  for (auto& [arm, curves] : by_arm) {
    try {
      reports[arm] = aggregate_curves(curves);
    } catch (const std::exception& e) {
      problems += "  arm " + arm + ": " + e.what() + "\n";
    }
  }
  if (!problems.empty()) throw std::runtime_error("render: bad inputs\n" + problems);

  std::uint64_t max_step = 1;
  for (const auto& [arm, r] : reports) {
    if (!r.env_steps.empty()) max_step = std::max(max_step, r.env_steps.back());
  }
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto sx = [&](double step) { return kLeft + pw * step / static_cast<double>(max_step); };
  auto sy = [&](double success) { return kTop + ph * (1.0 - success); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!task.empty()) {
    svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"16\" text-anchor=\"middle\">" << task
        << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double s = i / 5.0;
    svg << "<line x1=\"" << fmt(kLeft) << "\" y1=\"" << fmt(sy(s)) << "\" x2=\""
        << fmt(kLeft + pw) << "\" y2=\"" << fmt(sy(s)) << "\" stroke=\"#e0e0e0\"/>\n";
    svg << "<text x=\"" << fmt(kLeft - 6) << "\" y=\"" << fmt(sy(s) + 4)
        << "\" text-anchor=\"end\">" << fmt(s) << "</text>\n";
  }
  for (int i = 0; i <= 4; ++i) {
    const std::uint64_t step = max_step * i / 4;
    svg << "<text x=\"" << fmt(sx(static_cast<double>(step))) << "\" y=\""
        << fmt(kTop + ph + 16) << "\" text-anchor=\"middle\">" << tick_label(step)
        << "</text>\n";
  }
  svg << "<rect x=\"" << fmt(kLeft) << "\" y=\"" << fmt(kTop) << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << fmt(kLeft + pw / 2) << "\" y=\"" << fmt(kHeight - 12)
      << "\" text-anchor=\"middle\">environment steps</text>\n";
  svg << "<text transform=\"translate(16 " << fmt(kTop + ph / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">success rate (EMA)</text>\n";

  int legend_row = 0;
  for (const auto& [arm, r] : reports) {
    const char* color = arm_color(arm);
    std::string band;
    for (std::size_t i = 0; i < r.env_steps.size(); ++i) {
      band += fmt(sx(static_cast<double>(r.env_steps[i]))) + "," + fmt(sy(r.max[i])) + " ";
    }
    for (std::size_t i = r.env_steps.size(); i-- > 0;) {
      band += fmt(sx(static_cast<double>(r.env_steps[i]))) + "," + fmt(sy(r.min[i])) + " ";
    }
    band.pop_back();
    svg << "<polygon points=\"" << band << "\" fill=\"" << color
        << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
    std::string line;
    for (std::size_t i = 0; i < r.env_steps.size(); ++i) {
      line += (i ? " " : "") + fmt(sx(static_cast<double>(r.env_steps[i]))) + "," +
              fmt(sy(r.mean[i]));
    }
    svg << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 14 + 20 * legend_row++;
    svg << "<line x1=\"" << fmt(kLeft + pw + 12) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(kLeft + pw + 36) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(kLeft + pw + 42) << "\" y=\"" << fmt(ly + 4) << "\">" << arm
        << " (n=" << r.per_seed.size() << ")</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void render_curves(const std::vector<fs::path>& metric_files, const fs::path& output) {
  const std::string svg = render_curves_svg(metric_files);
  std::ofstream out(output, std::ios::binary);
  out << svg;
  if (!out) throw std::runtime_error("render: cannot write " + output.string());
}

}  // namespace rlingua
