#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <cmath>
#include <vector>

#include "fasttd3/envs.hpp"
#include "fasttd3/mlp.hpp"
#include "fasttd3/rng.hpp"
#include "fasttd3/tensor.hpp"

namespace oracles {

// Random net + input for finite-difference checks. Central differences are
// undefined across a ReLU kink, so resample until every pre-activation sits
// farther than `margin` from zero; probes with h = 1e-3 shift pre-activations
// by well under 0.02.
template <typename S>
std::pair<fasttd3::MlpParams<S>, fasttd3::Tensor2<S>> kink_clear_net(
    const std::vector<int>& dims, fasttd3::Activation head, uint64_t seed, int batch_rows = 2,
    S margin = S(0.02)) {
    for (uint64_t attempt = 0;; ++attempt) {
        fasttd3::RngStream rng = fasttd3::derive_stream(seed, attempt, 0xF1D);
        fasttd3::MlpParams<S> net = fasttd3::init_mlp<S>(dims, head, rng);
        fasttd3::Tensor2<S> input(batch_rows, dims.front());
        for (auto& v : input.data) v = static_cast<S>(rng.uniform(-1.0, 1.0));
        auto [out, tape] = fasttd3::mlp_forward(net, input);
        (void)out;
        bool clear = true;
        for (size_t l = 0; l + 1 < net.layers.size() && clear; ++l)
            for (S z : tape.pre[l].data)
                if (std::abs(z) < margin) {
                    clear = false;
                    break;
                }
        if (clear) return {std::move(net), std::move(input)};
    }
}

// Brute-force categorical projection: per-atom loop in double, written
// straight from the definition (clip, two-neighbor linear split).
inline std::vector<double> project_row_bruteforce(double v_min, double v_max, int num_atoms,
                                                  double reward, double discount, double mask,
                                                  const std::vector<double>& next_probs) {
    std::vector<double> out(num_atoms, 0.0);
    const double dz = (v_max - v_min) / (num_atoms - 1);
    for (int j = 0; j < num_atoms; ++j) {
        const double z_j = v_min + dz * j;
        double tz = reward + mask * discount * z_j;
        if (tz < v_min) tz = v_min;
        if (tz > v_max) tz = v_max;
        const double b = (tz - v_min) / dz;
        const int lo = static_cast<int>(std::floor(b));
        const int hi = static_cast<int>(std::ceil(b));
        if (lo == hi) {
            out[lo] += next_probs[j];
        } else {
            out[lo] += next_probs[j] * (hi - b);
            out[hi] += next_probs[j] * (b - lo);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scripted controllers. These solve the tasks analytically; they pin the
// solved thresholds and sanity-band the v_min/v_max defaults.

inline void pointmass_pd_policy(std::span<const float> state, float* action) {
    // velocity-target PD on the double integrator (state: x, v, goal)
    const float dx = state[0] - state[4];
    const float dy = state[1] - state[5];
    const float dist = std::sqrt(dx * dx + dy * dy);
    const float scale = dist > 1e-9f ? std::min(3.0f * dist, 2.0f) / dist : 0.0f;
    const float vdes_x = -dx * scale;
    const float vdes_y = -dy * scale;
    // dt = 0.05, action_scale = 4
    action[0] = std::clamp((vdes_x - state[2]) / (0.05f * 4.0f), -1.0f, 1.0f);
    action[1] = std::clamp((vdes_y - state[3]) / (0.05f * 4.0f), -1.0f, 1.0f);
}

inline void pendulum_energy_policy(std::span<const float> state, float* action) {
    const float th = fasttd3::detail::wrap_pi(state[0]);
    const float thd = state[1];
    if (std::abs(th) < 0.4f && std::abs(thd) < 2.5f) {
        action[0] = std::clamp(-8.0f * th - 2.0f * thd, -1.0f, 1.0f);
        return;
    }
    // pump energy toward the upright rest level (I = ml^2/3, E_upright = 0)
    const float energy = 0.5f * (1.0f / 3.0f) * thd * thd + 10.0f * 0.5f * (std::cos(th) - 1.0f);
    action[0] = std::abs(thd) > 0.05f ? std::clamp(thd * (-energy), -1.0f, 1.0f) : 1.0f;
}

inline void reacher_jt_policy(std::span<const float> state, float* action) {
    // Jacobian-transpose task-space PD (state: q1, q2, qd1, qd2, target)
    const float s1 = std::sin(state[0]), c1 = std::cos(state[0]);
    const float s12 = std::sin(state[0] + state[1]), c12 = std::cos(state[0] + state[1]);
    const float px = 0.5f * c1 + 0.5f * c12, py = 0.5f * s1 + 0.5f * s12;
    const float ex = state[4] - px, ey = state[5] - py;
    const float tau1 = (-0.5f * s1 - 0.5f * s12) * ex + (0.5f * c1 + 0.5f * c12) * ey;
    const float tau2 = (-0.5f * s12) * ex + (0.5f * c12) * ey;
    action[0] = std::clamp(6.0f * tau1 - 0.8f * state[2], -1.0f, 1.0f);
    action[1] = std::clamp(6.0f * tau2 - 0.8f * state[3], -1.0f, 1.0f);
}

enum class Scripted { pd, random, zero };

struct RolloutStats {
    double mean_return = 0.0;
    double std_return = 0.0;
    double min_discounted = 0.0;
    double max_discounted = 0.0;
    double mean_abs_action = 0.0;
};

// Roll episodes with a scripted controller through the real VecEnv.
inline RolloutStats scripted_rollouts(const fasttd3::TaskSpec& spec, Scripted policy, int episodes,
                                      uint64_t seed, double gamma = 0.99) {
    fasttd3::VecEnv env(spec, episodes, seed);
    fasttd3::RngStream arng = fasttd3::derive_stream(seed, 7, 0xAC7);
    std::vector<double> returns(episodes, 0.0), discounted(episodes, 0.0);
    std::vector<uint8_t> done(episodes, 0);
    double abs_action = 0.0;
    long long action_count = 0;
    for (int t = 0; t < spec.episode_limit; ++t) {
        fasttd3::Tensor2<float> actions(episodes, spec.action_dim);
        for (int e = 0; e < episodes; ++e) {
            float a[2] = {0.0f, 0.0f};
            if (policy == Scripted::pd) {
                switch (spec.kind) {
                    case fasttd3::TaskKind::pointmass2d: pointmass_pd_policy(env.phys().row(e), a); break;
                    case fasttd3::TaskKind::pendulum: pendulum_energy_policy(env.phys().row(e), a); break;
                    case fasttd3::TaskKind::reacher2: reacher_jt_policy(env.phys().row(e), a); break;
                }
            } else if (policy == Scripted::random) {
                for (int d = 0; d < spec.action_dim; ++d)
                    a[d] = static_cast<float>(arng.uniform(-1.0, 1.0));
            }
            for (int d = 0; d < spec.action_dim; ++d) actions(e, d) = a[d];
        }
        const fasttd3::StepResult res = env.step(actions);
        bool all_done = true;
        for (int e = 0; e < episodes; ++e) {
            if (!done[e]) {
                returns[e] += res.reward[e];
                discounted[e] += std::pow(gamma, t) * res.reward[e];
                for (int d = 0; d < spec.action_dim; ++d) abs_action += std::abs(actions(e, d));
                action_count += spec.action_dim;
                if (res.terminated[e] || res.truncated[e]) done[e] = 1;
            }
            all_done = all_done && done[e];
        }
        if (all_done) break;
    }
    RolloutStats st;
    st.min_discounted = discounted[0];
    st.max_discounted = discounted[0];
    for (int e = 0; e < episodes; ++e) {
        st.mean_return += returns[e];
        st.min_discounted = std::min(st.min_discounted, discounted[e]);
        st.max_discounted = std::max(st.max_discounted, discounted[e]);
    }
    st.mean_return /= episodes;
    double var = 0.0;
    for (int e = 0; e < episodes; ++e) {
        const double d = returns[e] - st.mean_return;
        var += d * d;
    }
    st.std_return = std::sqrt(var / episodes);
    st.mean_abs_action = abs_action / std::max(1LL, action_count);
    return st;
}

}  // namespace oracles
