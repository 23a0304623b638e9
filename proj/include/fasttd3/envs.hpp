#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fasttd3/error.hpp"
#include "fasttd3/rng.hpp"
#include "fasttd3/tensor.hpp"

namespace fasttd3 {

// In-process vectorized control tasks: analytic dynamics stepped in lockstep
// with auto-reset and final-observation capture. Each env owns a counter-based
// rng stream, so trajectories do not depend on how many envs run beside them.
//
// Tasks:
//   pointmass2d  double integrator chasing a goal; the actor sees the offset
//                to the goal, only the critic sees the absolute goal.
//                Terminates inside radius 0.05 with a terminal bonus.
//   pendulum     torque-limited swing-up, gym-style physics. Truncation only.
//   reacher2     2-link arm with damped joint torques reaching a point.
//                Truncation only.
//
// pendulum/reacher2 asymmetry: the critic sees exact joint velocities, the
// actor gets them quantized to 0.1.

enum class TaskKind { pointmass2d, pendulum, reacher2 };

struct TaskSpec {
    std::string name;
    TaskKind kind = TaskKind::pointmass2d;
    int obs_dim = 0;
    int critic_obs_dim = 0;
    int action_dim = 0;
    float dt = 0.05f;
    int episode_limit = 200;
    float action_scale = 1.0f;
    float v_min = -1.0f;  // default grid bounds, from scripted-rollout return percentiles
    float v_max = 1.0f;
    float solved_threshold = 0.0f;  // eval return at which the task counts as solved
    std::map<std::string, float> reward_weights;
};

inline TaskSpec make_task_spec(const std::string& name) {
    TaskSpec s;
    s.name = name;
    if (name == "pointmass2d") {
        s.kind = TaskKind::pointmass2d;
        s.obs_dim = 4;         // (x - goal, v)
        s.critic_obs_dim = 6;  // (x - goal, v, goal)
        s.action_dim = 2;
        s.action_scale = 4.0f;
        s.v_min = -500.0f;
        s.v_max = 15.0f;
        s.solved_threshold = -10.0f;
        s.reward_weights = {{"w_dist", 1.0f}, {"w_ctrl", 0.1f}, {"w_bonus", 10.0f}};
    } else if (name == "pendulum") {
        s.kind = TaskKind::pendulum;
        s.obs_dim = 3;  // (cos th, sin th, thdot)
        s.critic_obs_dim = 3;
        s.action_dim = 1;
        s.action_scale = 2.0f;
        s.v_min = -900.0f;
        s.v_max = 0.0f;
        s.solved_threshold = -300.0f;
        s.reward_weights = {{"w_angle", 1.0f}, {"w_vel", 0.1f}, {"w_ctrl", 0.01f}};
    } else if (name == "reacher2") {
        s.kind = TaskKind::reacher2;
        s.obs_dim = 8;  // (cos/sin of both joints, qdot, fingertip - target)
        s.critic_obs_dim = 8;
        s.action_dim = 2;
        s.action_scale = 8.0f;
        s.v_min = -300.0f;
        s.v_max = 0.0f;
        s.solved_threshold = -40.0f;
        s.reward_weights = {{"w_dist", 1.0f}, {"w_ctrl", 0.05f}};
    } else {
        throw ConfigError("unknown task '" + name + "' (valid: pointmass2d, pendulum, reacher2)");
    }
    return s;
}

inline TaskSpec set_reward_weights(TaskSpec spec, const std::map<std::string, float>& overrides) {
    for (const auto& [k, v] : overrides) {
        auto it = spec.reward_weights.find(k);
        if (it == spec.reward_weights.end()) {
            std::string valid;
            for (const auto& [name, unused] : spec.reward_weights) {
                if (!valid.empty()) valid += ", ";
                valid += name;
            }
            throw ConfigError("unknown reward term '" + k + "' for task " + spec.name +
                              " (valid: " + valid + ")");
        }
        it->second = v;
    }
    return spec;
}

struct StepResult {
    Tensor2<float> next_obs, next_privileged_obs;  // post-reset rows where an episode ended
    std::vector<float> reward;
    std::vector<uint8_t> terminated, truncated;
    // true successor observation, valid only on rows where terminated or truncated
    Tensor2<float> final_obs, final_privileged_obs;
};

namespace detail {

inline float wrap_pi(float a) {
    const float two_pi = 6.2831853071795864769f;
    float w = std::fmod(a + 3.14159265358979323846f, two_pi);
    if (w < 0.0f) w += two_pi;
    return w - 3.14159265358979323846f;
}

inline float quantize_01(float v) { return std::nearbyint(v * 10.0f) / 10.0f; }

inline float clip(float v, float lo, float hi) { return std::min(std::max(v, lo), hi); }

}  // namespace detail

class VecEnv {
  public:
    // Builds the vector and performs the initial reset of all envs. Env e
    // draws from the stream derived from (seed, first_env_id + e), so a
    // single env constructed with the matching id replays exactly.
    VecEnv(TaskSpec spec, int num_envs, uint64_t seed, int first_env_id = 0)
        : spec_(std::move(spec)), num_envs_(num_envs) {
        if (num_envs < 1) throw ConfigError("VecEnv: num_envs must be >= 1");
        state_ = Tensor2<float>(num_envs, state_dim(spec_.kind));
        steps_.assign(num_envs, 0);
        streams_.reserve(num_envs);
        for (int e = 0; e < num_envs; ++e)
            streams_.push_back(derive_stream(seed, static_cast<uint64_t>(first_env_id + e), kEnvPurpose));
        obs_ = Tensor2<float>(num_envs, spec_.obs_dim);
        priv_ = Tensor2<float>(num_envs, spec_.critic_obs_dim);
        for (int e = 0; e < num_envs; ++e) {
            reset_env(e);
            observe(e, obs_, priv_);
        }
    }

    const TaskSpec& spec() const { return spec_; }
    int num_envs() const { return num_envs_; }
    const Tensor2<float>& obs() const { return obs_; }
    const Tensor2<float>& privileged_obs() const { return priv_; }

    // test access: raw physical state rows and step counters
    Tensor2<float>& phys() { return state_; }
    const Tensor2<float>& phys() const { return state_; }
    std::vector<int>& step_counters() { return steps_; }

    StepResult step(const Tensor2<float>& actions) {
        if (actions.rows != num_envs_ || actions.cols != spec_.action_dim)
            throw ShapeError("VecEnv::step: actions must be num_envs x action_dim");
        StepResult res;
        res.next_obs = Tensor2<float>(num_envs_, spec_.obs_dim);
        res.next_privileged_obs = Tensor2<float>(num_envs_, spec_.critic_obs_dim);
        res.final_obs = Tensor2<float>(num_envs_, spec_.obs_dim);
        res.final_privileged_obs = Tensor2<float>(num_envs_, spec_.critic_obs_dim);
        res.reward.assign(num_envs_, 0.0f);
        res.terminated.assign(num_envs_, 0);
        res.truncated.assign(num_envs_, 0);

        for (int e = 0; e < num_envs_; ++e) {
            float clipped[2] = {0.0f, 0.0f};
            auto a = actions.row(e);
            for (int d = 0; d < spec_.action_dim; ++d) clipped[d] = detail::clip(a[d], -1.0f, 1.0f);

            bool terminated = false;
            advance(e, clipped, res.reward[e], terminated);
            if (!all_finite(std::span<const float>(state_.row(e))))
                throw NumericError("VecEnv::step: non-finite state in env " + std::to_string(e));

            steps_[e] += 1;
            const bool truncated = steps_[e] >= spec_.episode_limit;
            res.terminated[e] = terminated ? 1 : 0;
            res.truncated[e] = truncated ? 1 : 0;

            if (terminated || truncated) {
                observe(e, res.final_obs, res.final_privileged_obs);
                reset_env(e);
            }
            observe(e, res.next_obs, res.next_privileged_obs);
        }
        obs_ = res.next_obs;
        priv_ = res.next_privileged_obs;
        return res;
    }

    static int state_dim(TaskKind kind) {
        switch (kind) {
            case TaskKind::pointmass2d: return 6;  // x(2), v(2), goal(2)
            case TaskKind::pendulum: return 2;     // theta, thetadot
            case TaskKind::reacher2: return 6;     // q(2), qdot(2), target(2)
        }
        return 0;
    }

    // Fill obs/priv rows for env e from its current physical state.
    void observe(int e, Tensor2<float>& obs_out, Tensor2<float>& priv_out) const {
        auto st = state_.row(e);
        auto o = obs_out.row(e);
        auto p = priv_out.row(e);
        switch (spec_.kind) {
            case TaskKind::pointmass2d: {
                const float dx = st[0] - st[4], dy = st[1] - st[5];
                o[0] = dx; o[1] = dy; o[2] = st[2]; o[3] = st[3];
                p[0] = dx; p[1] = dy; p[2] = st[2]; p[3] = st[3]; p[4] = st[4]; p[5] = st[5];
                break;
            }
            case TaskKind::pendulum: {
                o[0] = std::cos(st[0]); o[1] = std::sin(st[0]); o[2] = detail::quantize_01(st[1]);
                p[0] = o[0]; p[1] = o[1]; p[2] = st[1];
                break;
            }
            case TaskKind::reacher2: {
                const float c1 = std::cos(st[0]), s1 = std::sin(st[0]);
                const float c12 = std::cos(st[0] + st[1]), s12 = std::sin(st[0] + st[1]);
                const float px = 0.5f * c1 + 0.5f * c12, py = 0.5f * s1 + 0.5f * s12;
                o[0] = c1; o[1] = s1; o[2] = std::cos(st[1]); o[3] = std::sin(st[1]);
                o[4] = detail::quantize_01(st[2]); o[5] = detail::quantize_01(st[3]);
                o[6] = px - st[4]; o[7] = py - st[5];
                for (int i = 0; i < 8; ++i) p[i] = o[i];
                p[4] = st[2]; p[5] = st[3];
                break;
            }
        }
    }

  private:
    static constexpr uint64_t kEnvPurpose = 0x456e76;  // stream namespace for env resets

    void reset_env(int e) {
        auto st = state_.row(e);
        auto& rng = streams_[e];
        steps_[e] = 0;
        switch (spec_.kind) {
            case TaskKind::pointmass2d:
                st[0] = static_cast<float>(rng.uniform(-1.0, 1.0));
                st[1] = static_cast<float>(rng.uniform(-1.0, 1.0));
                st[2] = 0.0f;
                st[3] = 0.0f;
                st[4] = static_cast<float>(rng.uniform(-1.0, 1.0));
                st[5] = static_cast<float>(rng.uniform(-1.0, 1.0));
                break;
            case TaskKind::pendulum:
                st[0] = static_cast<float>(rng.uniform(-3.14159265358979, 3.14159265358979));
                st[1] = static_cast<float>(rng.uniform(-1.0, 1.0));
                break;
            case TaskKind::reacher2: {
                st[0] = static_cast<float>(rng.uniform(-3.14159265358979, 3.14159265358979));
                st[1] = static_cast<float>(rng.uniform(-3.14159265358979, 3.14159265358979));
                st[2] = 0.0f;
                st[3] = 0.0f;
                const float r = static_cast<float>(rng.uniform(0.2, 0.9));
                const float phi = static_cast<float>(rng.uniform(-3.14159265358979, 3.14159265358979));
                st[4] = r * std::cos(phi);
                st[5] = r * std::sin(phi);
                break;
            }
        }
    }

    // Semi-implicit Euler step of env e under a clipped action.
    void advance(int e, const float* a, float& reward, bool& terminated) {
        auto st = state_.row(e);
        const float dt = spec_.dt;
        const auto& w = spec_.reward_weights;
        switch (spec_.kind) {
            case TaskKind::pointmass2d: {
                for (int d = 0; d < 2; ++d) {
                    st[2 + d] = detail::clip(st[2 + d] + a[d] * dt * spec_.action_scale, -2.0f, 2.0f);
                    st[d] = detail::clip(st[d] + st[2 + d] * dt, -2.0f, 2.0f);
                }
                const float dx = st[0] - st[4], dy = st[1] - st[5];
                const float d2 = dx * dx + dy * dy;
                terminated = std::sqrt(d2) <= 0.05f;
                reward = -w.at("w_dist") * d2 - w.at("w_ctrl") * (a[0] * a[0] + a[1] * a[1]) +
                         (terminated ? w.at("w_bonus") : 0.0f);
                break;
            }
            case TaskKind::pendulum: {
                const float u = spec_.action_scale * a[0];
                // m = 1, l = 1, g = 10: thdd = 1.5 g sin(th) + 3 u, theta 0 = upright
                st[1] = detail::clip(st[1] + (15.0f * std::sin(st[0]) + 3.0f * u) * dt, -8.0f, 8.0f);
                st[0] = detail::wrap_pi(st[0] + st[1] * dt);
                terminated = false;
                const float th = detail::wrap_pi(st[0]);
                reward = -(w.at("w_angle") * th * th + w.at("w_vel") * st[1] * st[1] +
                           w.at("w_ctrl") * a[0] * a[0]);
                break;
            }
            case TaskKind::reacher2: {
                for (int d = 0; d < 2; ++d) {
                    st[2 + d] = detail::clip(
                        st[2 + d] + (a[d] * spec_.action_scale - 1.0f * st[2 + d]) * dt, -10.0f, 10.0f);
                    st[d] = detail::wrap_pi(st[d] + st[2 + d] * dt);
                }
                const float px = 0.5f * std::cos(st[0]) + 0.5f * std::cos(st[0] + st[1]);
                const float py = 0.5f * std::sin(st[0]) + 0.5f * std::sin(st[0] + st[1]);
                const float ex = px - st[4], ey = py - st[5];
                terminated = false;
                reward = -w.at("w_dist") * (ex * ex + ey * ey) -
                         w.at("w_ctrl") * (a[0] * a[0] + a[1] * a[1]);
                break;
            }
        }
    }

    TaskSpec spec_;
    int num_envs_;
    Tensor2<float> state_;
    std::vector<int> steps_;
    std::vector<RngStream> streams_;
    Tensor2<float> obs_, priv_;
};

}  // namespace fasttd3
