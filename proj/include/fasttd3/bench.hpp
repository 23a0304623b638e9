#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fasttd3/metrics.hpp"
#include "fasttd3/trainer.hpp"

namespace fasttd3 {

// Ablation harness: one preset sweep per design-choice axis, k seeds per
// cell, one metrics file per run, and a summary of steps- and wall-seconds-
// to-threshold. Cells use a light profile (narrow nets, batch 256) so a full
// axis finishes in minutes on a CPU; the num_envs/batch/utd/... values under
// study are set per cell.

struct BenchCell {
    std::string label;
    TrainConfig cfg;
};

inline TrainConfig bench_base_config(const std::string& task) {
    TrainConfig cfg;
    cfg.task = task;
    cfg.num_envs = 128;
    cfg.batch_size = 256;
    cfg.width_mult = 0.25f;
    cfg.utd = 2;
    cfg.buffer_n = 1024;
    cfg.eval_every = 2000;
    cfg.eval_episodes = 10;
    cfg.early_stop = true;
    if (task == "pointmass2d") cfg.total_steps = 60000;
    else if (task == "pendulum") cfg.total_steps = 300000;
    else cfg.total_steps = 200000;
    return cfg;
}

inline std::vector<BenchCell> bench_cells(const std::string& axis, const TrainConfig& base) {
    std::vector<BenchCell> cells;
    auto add = [&](const std::string& label, auto&& mutate) {
        BenchCell c{label, base};
        mutate(c.cfg);
        cells.push_back(std::move(c));
    };
    if (axis == "num_envs") {
        // updates run per parallel step, so a fixed env-step budget would starve
        // the wide cells of updates; scale the budget (and eval cadence) with E
        // and compare cells on wall-seconds-to-threshold
        for (int e : {4, 32, 128, 512})
            add("num_envs=" + std::to_string(e), [e](TrainConfig& c) {
                c.num_envs = e;
                c.total_steps = std::max(c.total_steps, 2500LL * e);
                c.eval_every = std::max(c.eval_every, 50LL * e);
            });
    } else if (axis == "batch_size") {
        for (int b : {256, 1024, 4096})
            add("batch_size=" + std::to_string(b), [b](TrainConfig& c) { c.batch_size = b; });
    } else if (axis == "distributional") {
        add("distributional=on", [](TrainConfig& c) { c.distributional = true; });
        add("distributional=off", [](TrainConfig& c) { c.distributional = false; });
    } else if (axis == "cdq") {
        add("cdq=min", [](TrainConfig& c) { c.cdq = "min"; });
        add("cdq=avg", [](TrainConfig& c) { c.cdq = "avg"; });
    } else if (axis == "sigma_max") {
        for (float s : {0.1f, 0.2f, 0.4f}) {
            std::ostringstream label;
            label << "sigma_max=" << s;
            add(label.str(), [s](TrainConfig& c) {
                c.sigma_max = s;
                c.sigma_min = std::min(c.sigma_min, s);
            });
        }
    } else if (axis == "utd") {
        for (int u : {2, 4, 8}) add("utd=" + std::to_string(u), [u](TrainConfig& c) { c.utd = u; });
    } else if (axis == "buffer_n") {
        for (int n : {128, 1024, 8192})
            add("buffer_n=" + std::to_string(n), [n](TrainConfig& c) { c.buffer_n = n; });
    } else if (axis == "model_size") {
        for (float w : {0.25f, 0.5f, 1.0f}) {
            std::ostringstream label;
            label << "width_mult=" << w;
            add(label.str(), [w](TrainConfig& c) { c.width_mult = w; });
        }
    } else {
        throw ConfigError("unknown bench axis '" + axis +
                          "' (valid: num_envs, batch_size, distributional, cdq, sigma_max, utd, "
                          "buffer_n, model_size)");
    }
    return cells;
}

struct BenchRun {
    std::string label;
    uint64_t seed = 0;
    long long steps_to_threshold = -1;  // -1: never crossed
    double wall_to_threshold = -1.0;
    double final_return = 0.0;
    std::string metrics_path;
};

struct BenchCellSummary {
    std::string label;
    long long median_steps_to_threshold = -1;
    double median_wall_to_threshold = -1.0;
    std::vector<BenchRun> runs;
};

namespace detail {

template <typename T>
T median_of(std::vector<T> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

inline std::string sanitize_label(std::string s) {
    for (char& c : s)
        if (c == '=' || c == '.') c = '_';
    return s;
}

}  // namespace detail

inline std::vector<BenchCellSummary> run_bench(const std::string& axis, const std::string& task,
                                               int seeds, const std::string& out_dir,
                                               TrainConfig base, std::ostream& log = std::cout) {
    if (seeds < 1) throw ConfigError("bench: seeds must be >= 1");
    std::filesystem::create_directories(out_dir);
    const std::vector<BenchCell> cells = bench_cells(axis, base);
    std::vector<BenchCellSummary> summaries;
    for (const auto& cell : cells) {
        BenchCellSummary summary;
        summary.label = cell.label;
        for (int s = 0; s < seeds; ++s) {
            TrainConfig cfg = cell.cfg;
            cfg.seed = base.seed + static_cast<uint64_t>(s);
            const std::string path = out_dir + "/" + detail::sanitize_label(cell.label) + "_seed" +
                                     std::to_string(cfg.seed) + ".jsonl";
            MetricsWriter writer(path, cfg);
            const TrainResult res = train(cfg, &writer);
            BenchRun run;
            run.label = cell.label;
            run.seed = cfg.seed;
            run.metrics_path = path;
            run.steps_to_threshold = res.steps_to_threshold;
            if (res.steps_to_threshold >= 0) {
                for (const auto& row : res.metrics)
                    if (row.env_steps == res.steps_to_threshold) {
                        run.wall_to_threshold = row.wall_seconds;
                        break;
                    }
                // wall-time fallback when the run logged zeroed clocks
                if (run.wall_to_threshold <= 0.0) run.wall_to_threshold = res.wall_seconds;
            }
            if (!res.metrics.empty()) run.final_return = res.metrics.back().eval_return_mean;
            log << "  " << cell.label << " seed " << cfg.seed << ": steps_to_threshold "
                << run.steps_to_threshold << ", wall_to_threshold " << std::fixed
                << std::setprecision(1) << run.wall_to_threshold << "s, final_return "
                << std::setprecision(2) << run.final_return << "\n";
            summary.runs.push_back(std::move(run));
        }
        std::vector<long long> steps;
        std::vector<double> walls;
        for (const auto& r : summary.runs) {
            steps.push_back(r.steps_to_threshold < 0 ? base.total_steps + 1 : r.steps_to_threshold);
            walls.push_back(r.wall_to_threshold < 0 ? 1e18 : r.wall_to_threshold);
        }
        summary.median_steps_to_threshold = detail::median_of(steps);
        summary.median_wall_to_threshold = detail::median_of(walls);
        summaries.push_back(std::move(summary));
    }

    log << "axis " << axis << " on " << task << " (" << seeds << " seeds):\n";
    log << std::left << std::setw(24) << "cell" << std::right << std::setw(20)
        << "median steps" << std::setw(20) << "median wall (s)" << "\n";
    nlohmann::ordered_json jsum = nlohmann::ordered_json::array();
    for (const auto& s : summaries) {
        log << std::left << std::setw(24) << s.label << std::right << std::setw(20)
            << s.median_steps_to_threshold << std::setw(20) << std::fixed << std::setprecision(1)
            << s.median_wall_to_threshold << "\n";
        nlohmann::ordered_json j;
        j["cell"] = s.label;
        j["median_steps_to_threshold"] = s.median_steps_to_threshold;
        j["median_wall_to_threshold"] = s.median_wall_to_threshold;
        nlohmann::ordered_json runs = nlohmann::ordered_json::array();
        for (const auto& r : s.runs) {
            nlohmann::ordered_json jr;
            jr["seed"] = r.seed;
            jr["steps_to_threshold"] = r.steps_to_threshold;
            jr["wall_to_threshold"] = r.wall_to_threshold;
            jr["final_return"] = r.final_return;
            jr["metrics_path"] = r.metrics_path;
            runs.push_back(jr);
        }
        j["runs"] = runs;
        jsum.push_back(j);
    }
    std::ofstream out(out_dir + "/summary.json");
    out << jsum.dump(2) << "\n";
    return summaries;
}

}  // namespace fasttd3
