#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "fasttd3/envs.hpp"
#include "fasttd3/error.hpp"

namespace fasttd3 {

// Full hyperparameter record for a run. Optional fields resolve against the
// task: v_min/v_max default to the task grid, warmup_steps to 10 parallel
// steps of uniform actions.
struct TrainConfig {
    std::string task = "pointmass2d";
    std::string agent = "fasttd3";  // fasttd3 | fastsac
    int num_envs = 128;
    long long total_steps = 100000;  // env steps (each parallel step counts num_envs)
    int batch_size = 1024;
    int utd = 2;  // gradient updates per parallel env step
    int policy_delay = 2;
    float gamma = 0.99f;
    float tau = 0.1f;
    long long warmup_steps = -1;  // env steps of uniform-random actions; -1 = 10 * num_envs
    int num_atoms = 101;
    float v_min = NAN;  // NaN = task default
    float v_max = NAN;
    std::string cdq = "min";  // min | avg
    float sigma_min = 0.1f;
    float sigma_max = 0.4f;
    std::string sigma_resample = "on_reset";  // on_reset | fixed
    float sigma_target = 0.2f;
    float noise_clip = 0.5f;
    int buffer_n = 1024;  // per-env replay capacity
    uint64_t seed = 1;
    long long eval_every = 5000;  // env steps between metric rows
    int eval_episodes = 20;
    float lr = 3e-4f;
    std::string actor_q = "q1";  // q1 | avg: which critic(s) drive the actor gradient
    bool distributional = true;  // false = scalar critic head with squared-error TD loss
    float width_mult = 1.0f;
    bool deterministic = false;  // single-thread math, wall clock logged as 0
    bool early_stop = false;     // stop once an eval crosses the task's solved threshold
    std::map<std::string, float> reward_overrides;

    long long resolved_warmup() const { return warmup_steps < 0 ? 10LL * num_envs : warmup_steps; }

    // Grid bounds and reward weights resolved against the task spec.
    TaskSpec task_spec() const {
        TaskSpec spec = set_reward_weights(make_task_spec(task), reward_overrides);
        return spec;
    }
    float resolved_v_min() const { return std::isnan(v_min) ? make_task_spec(task).v_min : v_min; }
    float resolved_v_max() const { return std::isnan(v_max) ? make_task_spec(task).v_max : v_max; }

    void validate() const {
        task_spec();  // throws on unknown task or reward term
        if (agent != "fasttd3" && agent != "fastsac")
            throw ConfigError("invalid agent '" + agent + "' (valid: fasttd3, fastsac)");
        if (cdq != "min" && cdq != "avg")
            throw ConfigError("invalid cdq '" + cdq + "' (valid: min, avg)");
        if (actor_q != "q1" && actor_q != "avg")
            throw ConfigError("invalid actor_q '" + actor_q + "' (valid: q1, avg)");
        if (sigma_resample != "on_reset" && sigma_resample != "fixed")
            throw ConfigError("invalid sigma_resample '" + sigma_resample +
                              "' (valid: on_reset, fixed)");
        if (num_envs < 1) throw ConfigError("num_envs must be >= 1");
        if (total_steps < 0) throw ConfigError("total_steps must be >= 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (utd < 1) throw ConfigError("utd must be >= 1");
        if (policy_delay < 1) throw ConfigError("policy_delay must be >= 1");
        if (!(gamma >= 0.0f && gamma < 1.0f)) throw ConfigError("gamma must be in [0, 1)");
        if (!(tau >= 0.0f && tau <= 1.0f)) throw ConfigError("tau must be in [0, 1]");
        if (num_atoms < 2) throw ConfigError("num_atoms must be >= 2");
        if (!(resolved_v_min() < resolved_v_max())) throw ConfigError("v_min must be < v_max");
        if (!(sigma_min >= 0.0f && sigma_min <= sigma_max))
            throw ConfigError("need 0 <= sigma_min <= sigma_max");
        if (sigma_target < 0.0f || noise_clip < 0.0f)
            throw ConfigError("sigma_target and noise_clip must be >= 0");
        if (buffer_n < 1) throw ConfigError("buffer_n must be >= 1");
        if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
        if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
        if (!(lr > 0.0f)) throw ConfigError("lr must be > 0");
        if (!(width_mult > 0.0f)) throw ConfigError("width_mult must be > 0");
    }
};

// --paper-scale preset: the regime the recipe targets on big hardware.
inline void apply_paper_scale(TrainConfig& cfg) {
    cfg.num_envs = 2048;
    cfg.batch_size = 32768;
    cfg.buffer_n = 1024;
}

namespace detail {

inline long long parse_int_value(const std::string& v, int line_no) {
    try {
        size_t pos = 0;
        const long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected integer, got '" + v + "'");
    }
}

inline double parse_num_value(const std::string& v, int line_no) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("line " + std::to_string(line_no) + ": expected number, got '" + v + "'");
    }
}

inline bool parse_bool_value(const std::string& v, int line_no) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError("line " + std::to_string(line_no) + ": expected true/false, got '" + v + "'");
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

// Apply one `key = value` assignment. Shared by the config-file parser and
// anything that wants programmatic overrides.
inline void apply_config_key(TrainConfig& cfg, const std::string& key, const std::string& value,
                             int line_no = 0) {
    using detail::parse_bool_value;
    using detail::parse_int_value;
    using detail::parse_num_value;
    if (key == "task") cfg.task = value;
    else if (key == "agent") cfg.agent = value;
    else if (key == "num_envs") cfg.num_envs = static_cast<int>(parse_int_value(value, line_no));
    else if (key == "total_steps") cfg.total_steps = parse_int_value(value, line_no);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int_value(value, line_no));
    else if (key == "utd") cfg.utd = static_cast<int>(parse_int_value(value, line_no));
    else if (key == "policy_delay") cfg.policy_delay = static_cast<int>(parse_int_value(value, line_no));
    else if (key == "gamma") cfg.gamma = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "tau") cfg.tau = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "warmup_steps") cfg.warmup_steps = parse_int_value(value, line_no);
    else if (key == "num_atoms") cfg.num_atoms = static_cast<int>(parse_int_value(value, line_no));
    else if (key == "v_min") cfg.v_min = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "v_max") cfg.v_max = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "cdq") cfg.cdq = value;
    else if (key == "sigma_min") cfg.sigma_min = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "sigma_max") cfg.sigma_max = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "sigma_resample") cfg.sigma_resample = value;
    else if (key == "sigma_target") cfg.sigma_target = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "noise_clip") cfg.noise_clip = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "buffer_n") cfg.buffer_n = static_cast<int>(parse_int_value(value, line_no));
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(parse_int_value(value, line_no));
    else if (key == "eval_every") cfg.eval_every = parse_int_value(value, line_no);
    else if (key == "eval_episodes") cfg.eval_episodes = static_cast<int>(parse_int_value(value, line_no));
    else if (key == "lr") cfg.lr = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "actor_q") cfg.actor_q = value;
    else if (key == "distributional") cfg.distributional = parse_bool_value(value, line_no);
    else if (key == "width_mult") cfg.width_mult = static_cast<float>(parse_num_value(value, line_no));
    else if (key == "deterministic") cfg.deterministic = parse_bool_value(value, line_no);
    else if (key == "early_stop") cfg.early_stop = parse_bool_value(value, line_no);
    else if (key.rfind("reward.", 0) == 0)
        cfg.reward_overrides[key.substr(7)] = static_cast<float>(parse_num_value(value, line_no));
    else
        throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
}

// Flat `key = value` file with '#' comments. Values already present in cfg
// act as the defaults; CLI flags are applied on top by the caller.
inline TrainConfig load_config(const std::string& path, TrainConfig cfg = TrainConfig{}) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
        apply_config_key(cfg, key, value, line_no);
    }
    return cfg;
}

}  // namespace fasttd3
