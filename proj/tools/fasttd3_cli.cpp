// Command-line entry points: train, eval, bench.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "fasttd3/fasttd3.hpp"

namespace {

using namespace fasttd3;

// flag values only applied when the user actually passed them, so the
// precedence is CLI > config file > defaults
struct TrainFlags {
    std::optional<std::string> task, agent, cdq;
    std::optional<int> num_envs, batch_size, utd, buffer_n, num_atoms, eval_episodes;
    std::optional<long long> total_steps, eval_every;
    std::optional<double> v_min, v_max, sigma_min, sigma_max;
    std::optional<uint64_t> seed;
    std::vector<std::string> reward_weights;
    bool paper_scale = false;
    bool deterministic = false;
    std::string config_path, log_path, checkpoint_path;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--task", f.task, "task name: pointmass2d, pendulum, reacher2");
    cmd->add_option("--agent", f.agent, "agent: fasttd3 or fastsac");
    cmd->add_option("--num-envs", f.num_envs, "parallel environments");
    cmd->add_option("--total-steps", f.total_steps, "total env steps to collect");
    cmd->add_option("--batch-size", f.batch_size, "update batch size");
    cmd->add_option("--utd", f.utd, "gradient updates per parallel env step");
    cmd->add_option("--buffer-n", f.buffer_n, "per-env replay capacity N");
    cmd->add_option("--num-atoms", f.num_atoms, "categorical critic atoms");
    cmd->add_option("--v-min", f.v_min, "critic grid lower bound");
    cmd->add_option("--v-max", f.v_max, "critic grid upper bound");
    cmd->add_option("--cdq", f.cdq, "clipped double Q mode: min or avg");
    cmd->add_option("--sigma-min", f.sigma_min, "exploration noise lower bound");
    cmd->add_option("--sigma-max", f.sigma_max, "exploration noise upper bound");
    cmd->add_option("--seed", f.seed, "run seed");
    cmd->add_option("--log", f.log_path, "metrics file path (jsonl)");
    cmd->add_option("--checkpoint", f.checkpoint_path, "final checkpoint path");
    cmd->add_option("--eval-every", f.eval_every, "env steps between eval/log points");
    cmd->add_option("--eval-episodes", f.eval_episodes, "episodes per evaluation");
    cmd->add_option("--reward-weight", f.reward_weights, "reward term override NAME=VALUE")
        ->take_all();
    cmd->add_flag("--paper-scale", f.paper_scale, "paper-scale preset (2048 envs, batch 32768)");
    cmd->add_flag("--deterministic", f.deterministic,
                  "single-thread math, zeroed wall clock: byte-reproducible logs");
    cmd->add_option("--config", f.config_path, "key = value config file");
}

TrainConfig resolve_config(const TrainFlags& f) {
    TrainConfig cfg;
    if (!f.config_path.empty()) cfg = load_config(f.config_path);
    if (f.paper_scale) apply_paper_scale(cfg);
    if (f.task) cfg.task = *f.task;
    if (f.agent) cfg.agent = *f.agent;
    if (f.num_envs) cfg.num_envs = *f.num_envs;
    if (f.total_steps) cfg.total_steps = *f.total_steps;
    if (f.batch_size) cfg.batch_size = *f.batch_size;
    if (f.utd) cfg.utd = *f.utd;
    if (f.buffer_n) cfg.buffer_n = *f.buffer_n;
    if (f.num_atoms) cfg.num_atoms = *f.num_atoms;
    if (f.v_min) cfg.v_min = static_cast<float>(*f.v_min);
    if (f.v_max) cfg.v_max = static_cast<float>(*f.v_max);
    if (f.cdq) cfg.cdq = *f.cdq;
    if (f.sigma_min) cfg.sigma_min = static_cast<float>(*f.sigma_min);
    if (f.sigma_max) cfg.sigma_max = static_cast<float>(*f.sigma_max);
    if (f.seed) cfg.seed = *f.seed;
    if (f.eval_every) cfg.eval_every = *f.eval_every;
    if (f.eval_episodes) cfg.eval_episodes = *f.eval_episodes;
    if (f.deterministic) cfg.deterministic = true;
    for (const auto& kv : f.reward_weights) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--reward-weight expects NAME=VALUE, got '" + kv + "'");
        apply_config_key(cfg, "reward." + kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

int run_train(const TrainFlags& f) {
    const TrainConfig cfg = resolve_config(f);
    cfg.validate();
    std::optional<MetricsWriter> writer;
    if (!f.log_path.empty()) writer.emplace(f.log_path, cfg);
    const TrainResult res = train(cfg, writer ? &*writer : nullptr);
    if (!f.checkpoint_path.empty())
        save_checkpoint(f.checkpoint_path, state_to_tensors(res.state, cfg.agent == "fastsac"));
    std::cout << "trained " << res.parallel_steps * cfg.num_envs << " env steps ("
              << res.parallel_steps << " parallel steps, " << res.update_calls << " updates)";
    if (!res.metrics.empty())
        std::cout << ", final eval return " << res.metrics.back().eval_return_mean;
    if (res.steps_to_threshold >= 0)
        std::cout << ", solved at " << res.steps_to_threshold << " env steps";
    std::cout << "\n";
    return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& task, int episodes,
             uint64_t seed) {
    const TaskSpec spec = make_task_spec(task);
    const LoadedActor loaded = load_actor(checkpoint_path, spec);
    const EvalStats stats = evaluate(loaded.actor, loaded.sac_head, spec, episodes, seed);
    nlohmann::ordered_json j;
    j["task"] = task;
    j["episodes"] = episodes;
    j["seed"] = seed;
    j["eval_return_mean"] = stats.return_mean;
    j["eval_return_std"] = stats.return_std;
    j["eval_episode_len"] = stats.mean_len;
    std::cout << j.dump() << "\n";
    return 0;
}

int run_bench_cmd(const std::string& axis, const std::string& task, int seeds, uint64_t seed,
              const std::string& out_dir, std::optional<long long> total_steps,
              bool deterministic) {
    TrainConfig base = bench_base_config(task);
    base.seed = seed;
    base.deterministic = deterministic;
    if (total_steps) base.total_steps = *total_steps;
    run_bench(axis, task, seeds, out_dir, base);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FastTD3: off-policy RL with parallel simulation, large-batch updates, and a "
                 "categorical distributional critic"};
    app.require_subcommand(1);

    TrainFlags train_flags;
    CLI::App* train_cmd = app.add_subcommand("train", "train an agent");
    add_train_flags(train_cmd, train_flags);

    std::string eval_checkpoint, eval_task = "pointmass2d";
    int eval_episodes = 10;
    uint64_t eval_seed = 1;
    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
    eval_cmd->add_option("--task", eval_task, "task name");
    eval_cmd->add_option("--episodes", eval_episodes, "episodes to run");
    eval_cmd->add_option("--seed", eval_seed, "eval seed");

    std::string bench_axis, bench_task = "pointmass2d", bench_out = "bench_out";
    int bench_seeds = 3;
    uint64_t bench_seed = 1;
    std::optional<long long> bench_total_steps;
    bool bench_deterministic = false;
    CLI::App* bench_cmd = app.add_subcommand("bench", "run one ablation axis");
    bench_cmd
        ->add_option("--axis", bench_axis,
                     "num_envs, batch_size, distributional, cdq, sigma_max, utd, buffer_n, "
                     "model_size")
        ->required();
    bench_cmd->add_option("--task", bench_task, "task name");
    bench_cmd->add_option("--seeds", bench_seeds, "seeds per cell");
    bench_cmd->add_option("--seed", bench_seed, "base seed");
    bench_cmd->add_option("--out", bench_out, "output directory");
    bench_cmd->add_option("--total-steps", bench_total_steps, "env-step budget per run");
    bench_cmd->add_flag("--deterministic", bench_deterministic, "byte-reproducible cell runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (train_cmd->parsed()) return run_train(train_flags);
        if (eval_cmd->parsed()) return run_eval(eval_checkpoint, eval_task, eval_episodes, eval_seed);
        if (bench_cmd->parsed())
            return run_bench_cmd(bench_axis, bench_task, bench_seeds, bench_seed, bench_out,
                             bench_total_steps, bench_deterministic);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
