#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fasttd3/config.hpp"
#include "fasttd3/error.hpp"

namespace fasttd3 {

// Newline-delimited metrics log. First record echoes the resolved config
// under the key "config"; every later record is one flat log point. Each
// line is flushed as written, so a killed run still leaves a parseable file.

struct MetricsRow {
    long long env_steps = 0;
    double wall_seconds = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double mean_q = 0.0;
    double eval_return_mean = 0.0;
    double eval_return_std = 0.0;
    double eval_episode_len = 0.0;
};

inline nlohmann::ordered_json config_to_json(const TrainConfig& cfg) {
    nlohmann::ordered_json j;
    j["task"] = cfg.task;
    j["agent"] = cfg.agent;
    j["num_envs"] = cfg.num_envs;
    j["total_steps"] = cfg.total_steps;
    j["batch_size"] = cfg.batch_size;
    j["utd"] = cfg.utd;
    j["policy_delay"] = cfg.policy_delay;
    j["gamma"] = cfg.gamma;
    j["tau"] = cfg.tau;
    j["warmup_steps"] = cfg.resolved_warmup();
    j["num_atoms"] = cfg.num_atoms;
    j["v_min"] = cfg.resolved_v_min();
    j["v_max"] = cfg.resolved_v_max();
    j["cdq"] = cfg.cdq;
    j["sigma_min"] = cfg.sigma_min;
    j["sigma_max"] = cfg.sigma_max;
    j["sigma_resample"] = cfg.sigma_resample;
    j["sigma_target"] = cfg.sigma_target;
    j["noise_clip"] = cfg.noise_clip;
    j["buffer_n"] = cfg.buffer_n;
    j["seed"] = cfg.seed;
    j["eval_every"] = cfg.eval_every;
    j["eval_episodes"] = cfg.eval_episodes;
    j["lr"] = cfg.lr;
    j["actor_q"] = cfg.actor_q;
    j["distributional"] = cfg.distributional;
    j["width_mult"] = cfg.width_mult;
    j["deterministic"] = cfg.deterministic;
    j["early_stop"] = cfg.early_stop;
    nlohmann::ordered_json rw = nlohmann::ordered_json::object();
    for (const auto& [k, v] : cfg.task_spec().reward_weights) rw[k] = v;
    j["reward_weights"] = rw;
    return j;
}

inline nlohmann::ordered_json row_to_json(const MetricsRow& r) {
    nlohmann::ordered_json j;
    j["env_steps"] = r.env_steps;
    j["wall_seconds"] = r.wall_seconds;
    j["critic_loss"] = r.critic_loss;
    j["actor_loss"] = r.actor_loss;
    j["mean_q"] = r.mean_q;
    j["eval_return_mean"] = r.eval_return_mean;
    j["eval_return_std"] = r.eval_return_std;
    j["eval_episode_len"] = r.eval_episode_len;
    return j;
}

class MetricsWriter {
  public:
    MetricsWriter(const std::string& path, const TrainConfig& cfg) : out_(path, std::ios::trunc) {
        if (!out_) throw IoError("cannot open metrics file '" + path + "' for writing");
        nlohmann::ordered_json header;
        header["config"] = config_to_json(cfg);
        out_ << header.dump() << '\n';
        out_.flush();
    }

    void append(const MetricsRow& row) {
        out_ << row_to_json(row).dump() << '\n';
        out_.flush();
    }

  private:
    std::ofstream out_;
};

struct MetricsFile {
    nlohmann::ordered_json config;
    std::vector<MetricsRow> rows;
};

inline MetricsFile read_metrics(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open metrics file '" + path + "'");
    MetricsFile file;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        // a crash can leave one unterminated record at the tail; tolerate it
        auto j = nlohmann::ordered_json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) {
            if (in.peek() == EOF && !first) break;
            throw IoError("metrics file '" + path + "' has a malformed record");
        }
        if (first) {
            if (!j.contains("config")) throw IoError("metrics file missing config header");
            file.config = j["config"];
            first = false;
            continue;
        }
        MetricsRow r;
        r.env_steps = j.at("env_steps").get<long long>();
        r.wall_seconds = j.at("wall_seconds").get<double>();
        r.critic_loss = j.at("critic_loss").get<double>();
        r.actor_loss = j.at("actor_loss").get<double>();
        r.mean_q = j.at("mean_q").get<double>();
        r.eval_return_mean = j.at("eval_return_mean").get<double>();
        r.eval_return_std = j.at("eval_return_std").get<double>();
        r.eval_episode_len = j.at("eval_episode_len").get<double>();
        file.rows.push_back(r);
    }
    if (first) throw IoError("metrics file '" + path + "' is empty");
    return file;
}

}  // namespace fasttd3
