#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fasttd3/config.hpp"
#include "fasttd3/distributional.hpp"
#include "fasttd3/envs.hpp"
#include "fasttd3/exploration.hpp"
#include "fasttd3/metrics.hpp"
#include "fasttd3/networks.hpp"
#include "fasttd3/replay.hpp"

namespace fasttd3 {

// Training loop: collect one parallel step from E envs, run utd large-batch
// critic updates, delayed actor updates, Polyak target updates. The loop is a
// single logical sequence; determinism for a fixed seed comes from the
// counter-based streams plus a fixed BLAS thread count.

struct TrainState {
    TaskSpec task;
    AtomGrid<float> grid;
    ActorNet<float> actor;
    CriticPair<float> critics;
    TargetSet<float> targets;
    AdamState<float> adam_actor, adam_q1, adam_q2;
    // FastSAC temperature (log alpha with its own scalar Adam)
    float log_alpha = 0.0f;
    float alpha_m = 0.0f, alpha_v = 0.0f;
    long long alpha_steps = 0;
    long long update_count = 0;  // critic updates so far; actor runs every policy_delay-th
};

struct UpdateResult {
    float critic_loss = 0.0f;
    std::optional<float> actor_loss;
    float alpha = 0.0f;
    float mean_q = 0.0f;
};

namespace detail {

constexpr uint64_t kInitPurpose = 0x101;
constexpr uint64_t kNoisePurpose = 0x102;
constexpr uint64_t kSigmaPurpose = 0x103;
constexpr uint64_t kWarmupPurpose = 0x104;
constexpr uint64_t kUpdatePurpose = 0x105;
constexpr uint64_t kSamplePurpose = 0x106;
constexpr uint64_t kEvalSalt = 0x4576616C;

inline const std::vector<int> kActorHidden{512, 256, 128};
inline const std::vector<int> kCriticHidden{1024, 512, 256};

// per-row min/avg over two column vectors
inline std::vector<float> combine_scalar_q(const Tensor2<float>& q1, const Tensor2<float>& q2,
                                           CdqMode mode) {
    std::vector<float> out(q1.rows);
    for (int r = 0; r < q1.rows; ++r)
        out[r] = mode == CdqMode::min ? std::min(q1(r, 0), q2(r, 0))
                                      : 0.5f * (q1(r, 0) + q2(r, 0));
    return out;
}

}  // namespace detail

inline CdqMode parse_cdq(const std::string& s) {
    return s == "avg" ? CdqMode::avg : CdqMode::min;
}

inline TrainState init_train_state(const TrainConfig& cfg) {
    TrainState st;
    st.task = cfg.task_spec();
    st.grid = AtomGrid<float>(cfg.resolved_v_min(), cfg.resolved_v_max(), cfg.num_atoms);

    RngStream init_rng = derive_stream(cfg.seed, 0, detail::kInitPurpose);
    const auto actor_hidden = scaled_hidden(detail::kActorHidden, cfg.width_mult);
    const auto critic_hidden = scaled_hidden(detail::kCriticHidden, cfg.width_mult);
    const bool sac = cfg.agent == "fastsac";
    const int actor_out = sac ? 2 * st.task.action_dim : st.task.action_dim;
    const Activation head = sac ? Activation::identity : Activation::tanh;
    st.actor = make_actor<float>(st.task.obs_dim, actor_out, actor_hidden, head, init_rng);
    const int critic_head = cfg.distributional ? cfg.num_atoms : 1;
    st.critics = make_critics<float>(st.task.critic_obs_dim, st.task.action_dim, critic_head, st.grid,
                                     critic_hidden, init_rng);
    st.targets = TargetSet<float>{st.actor, st.critics};
    st.adam_actor = make_adam_state(st.actor.mlp, cfg.lr);
    st.adam_q1 = make_adam_state(st.critics.q1, cfg.lr);
    st.adam_q2 = make_adam_state(st.critics.q2, cfg.lr);
    return st;
}

// ---------------------------------------------------------------------------
// TD3 update

inline UpdateResult td3_update(TrainState& st, const TransitionBatch<float>& batch,
                               const TrainConfig& cfg, RngStream& update_rng) {
    st.update_count += 1;
    const CdqMode mode = parse_cdq(cfg.cdq);
    const int B = batch.rows();
    UpdateResult res;

    // bootstrap target from smoothed target-policy actions
    Tensor2<float> next_actions = actor_forward(st.targets.actor, batch.next_obs);
    next_actions = target_policy_smoothing(next_actions, cfg.sigma_target, cfg.noise_clip, update_rng);

    const Tensor2<float> joined = hcat(batch.privileged_obs, batch.action);
    if (cfg.distributional) {
        auto [tl1, tl2] =
            critic_forward(st.targets.critics, batch.next_privileged_obs, next_actions);
        CategoricalDistribution<float> d1{st.grid, softmax_rows(tl1)};
        CategoricalDistribution<float> d2{st.grid, softmax_rows(tl2)};
        CategoricalDistribution<float> dn = clipped_double_target(d1, d2, mode);
        const Tensor2<float> target = project_target(
            st.grid, std::span<const float>(batch.reward), cfg.gamma,
            std::span<const float>(batch.bootstrap_mask), dn.probs);

        auto [out1, tape1] = mlp_forward(st.critics.q1, joined);
        auto [loss1, g1] = cross_entropy_loss(out1, target);
        adam_step(st.critics.q1, mlp_backward(st.critics.q1, tape1, g1), st.adam_q1);

        auto [out2, tape2] = mlp_forward(st.critics.q2, joined);
        auto [loss2, g2] = cross_entropy_loss(out2, target);
        adam_step(st.critics.q2, mlp_backward(st.critics.q2, tape2, g2), st.adam_q2);

        res.critic_loss = 0.5f * (loss1 + loss2);
        const auto ev = expected_value(CategoricalDistribution<float>{st.grid, softmax_rows(out1)});
        double q_acc = 0.0;
        for (float v : ev) q_acc += v;
        res.mean_q = static_cast<float>(q_acc / B);
    } else {
        // scalar-critic ablation: squared-error TD with the same CDQ choice
        auto [tq1, tq2] = critic_forward(st.targets.critics, batch.next_privileged_obs, next_actions);
        const std::vector<float> qn = detail::combine_scalar_q(tq1, tq2, mode);
        std::vector<float> y(B);
        for (int r = 0; r < B; ++r)
            y[r] = batch.reward[r] + cfg.gamma * batch.bootstrap_mask[r] * qn[r];

        double loss_acc = 0.0;
        double q_acc = 0.0;
        for (auto* critic : {&st.critics.q1, &st.critics.q2}) {
            auto [out, tape] = mlp_forward(*critic, joined);
            Tensor2<float> g(B, 1);
            for (int r = 0; r < B; ++r) {
                const float err = out(r, 0) - y[r];
                loss_acc += static_cast<double>(err) * err;
                g(r, 0) = 2.0f * err / B;
            }
            if (critic == &st.critics.q1)
                for (int r = 0; r < B; ++r) q_acc += out(r, 0);
            auto& adam = critic == &st.critics.q1 ? st.adam_q1 : st.adam_q2;
            adam_step(*critic, mlp_backward(*critic, tape, g), adam);
        }
        res.critic_loss = static_cast<float>(loss_acc / (2.0 * B));
        res.mean_q = static_cast<float>(q_acc / B);
    }
    if (!std::isfinite(res.critic_loss)) throw NumericError("td3_update: non-finite critic loss");

    // delayed actor update and target refresh
    if (st.update_count % cfg.policy_delay == 0) {
        auto [pi_actions, actor_tape] = mlp_forward(st.actor.mlp, batch.obs);
        const Tensor2<float> joined_pi = hcat(batch.privileged_obs, pi_actions);
        const int priv_dim = batch.privileged_obs.cols;
        const int action_dim = pi_actions.cols;
        const bool use_both = cfg.actor_q == "avg";
        const float critic_weight = use_both ? 0.5f : 1.0f;

        Tensor2<float> d_actions(B, action_dim);
        double loss_acc = 0.0;
        for (auto* critic : {&st.critics.q1, use_both ? &st.critics.q2 : nullptr}) {
            if (!critic) continue;
            auto [out, tape] = mlp_forward(*critic, joined_pi);
            Tensor2<float> dlogits(B, out.cols);
            if (cfg.distributional) {
                const Tensor2<float> p = softmax_rows(out);
                const auto ev = expected_value(CategoricalDistribution<float>{st.grid, p});
                for (int r = 0; r < B; ++r) {
                    loss_acc -= critic_weight * static_cast<double>(ev[r]);
                    auto pr = p.row(r);
                    auto gr = dlogits.row(r);
                    // d(-E)/dlogit_j = -p_j (z_j - E)
                    for (int j = 0; j < out.cols; ++j)
                        gr[j] = -critic_weight * pr[j] * (st.grid.atoms[j] - ev[r]) / B;
                }
            } else {
                for (int r = 0; r < B; ++r) {
                    loss_acc -= critic_weight * static_cast<double>(out(r, 0));
                    dlogits(r, 0) = -critic_weight / B;
                }
            }
            MlpGrads<float> cg = mlp_backward(*critic, tape, dlogits);
            for (int r = 0; r < B; ++r) {
                auto src = cg.input_grad.row(r);
                auto dst = d_actions.row(r);
                for (int d = 0; d < action_dim; ++d)
                    dst[d] += src[priv_dim + d];  // critic params stay untouched here
            }
        }
        adam_step(st.actor.mlp, mlp_backward(st.actor.mlp, actor_tape, d_actions), st.adam_actor);
        res.actor_loss = static_cast<float>(loss_acc / B);
        if (!std::isfinite(*res.actor_loss)) throw NumericError("td3_update: non-finite actor loss");

        polyak_update(st.targets.actor.mlp, st.actor.mlp, cfg.tau);
        polyak_update(st.targets.critics.q1, st.critics.q1, cfg.tau);
        polyak_update(st.targets.critics.q2, st.critics.q2, cfg.tau);
    }
    return res;
}

// ---------------------------------------------------------------------------
// FastSAC update

namespace detail {

constexpr float kLogStdMin = -5.0f;
constexpr float kLogStdMax = 2.0f;
constexpr float kTanhEps = 1e-6f;

// Squashed-Gaussian sample with everything backward needs.
struct SacSample {
    Tensor2<float> actions;    // tanh(u)
    Tensor2<float> u;          // mean + std * xi
    Tensor2<float> mean;
    Tensor2<float> log_std;    // clamped
    Tensor2<float> clamp_mask; // 1 where the raw log_std was inside the clamp range
    std::vector<float> log_pi; // per row
};

inline SacSample sac_sample(const Tensor2<float>& head, RngStream& rng) {
    const int B = head.rows;
    const int A = head.cols / 2;
    SacSample s;
    s.actions = Tensor2<float>(B, A);
    s.u = Tensor2<float>(B, A);
    s.mean = Tensor2<float>(B, A);
    s.log_std = Tensor2<float>(B, A);
    s.clamp_mask = Tensor2<float>(B, A);
    s.log_pi.assign(B, 0.0f);
    constexpr float kHalfLog2Pi = 0.91893853320467274178f;
    for (int r = 0; r < B; ++r) {
        auto h = head.row(r);
        double lp = 0.0;
        for (int d = 0; d < A; ++d) {
            const float mu = h[d];
            const float raw = h[A + d];
            const float ls = std::min(std::max(raw, kLogStdMin), kLogStdMax);
            const float xi = static_cast<float>(rng.normal());
            const float u = mu + std::exp(ls) * xi;
            const float a = std::tanh(u);
            s.mean(r, d) = mu;
            s.log_std(r, d) = ls;
            s.clamp_mask(r, d) = (raw > kLogStdMin && raw < kLogStdMax) ? 1.0f : 0.0f;
            s.u(r, d) = u;
            s.actions(r, d) = a;
            lp += -0.5 * xi * xi - ls - kHalfLog2Pi - std::log(1.0f - a * a + kTanhEps);
        }
        s.log_pi[r] = static_cast<float>(lp);
    }
    return s;
}

}  // namespace detail

inline UpdateResult sac_update(TrainState& st, const TransitionBatch<float>& batch,
                               const TrainConfig& cfg, RngStream& update_rng) {
    st.update_count += 1;
    const CdqMode mode = parse_cdq(cfg.cdq);
    const int B = batch.rows();
    const float alpha = std::exp(st.log_alpha);
    UpdateResult res;
    res.alpha = alpha;

    // critic target: next action from the current policy, entropy bonus folded
    // into the scalar shift before projection
    const Tensor2<float> next_head = mlp_forward(st.actor.mlp, batch.next_obs).first;
    detail::SacSample next = detail::sac_sample(next_head, update_rng);

    const Tensor2<float> joined = hcat(batch.privileged_obs, batch.action);
    if (cfg.distributional) {
        auto [tl1, tl2] = critic_forward(st.targets.critics, batch.next_privileged_obs, next.actions);
        CategoricalDistribution<float> d1{st.grid, softmax_rows(tl1)};
        CategoricalDistribution<float> d2{st.grid, softmax_rows(tl2)};
        CategoricalDistribution<float> dn = clipped_double_target(d1, d2, mode);
        std::vector<float> shifted(B);
        for (int r = 0; r < B; ++r)
            shifted[r] = batch.reward[r] -
                         batch.bootstrap_mask[r] * cfg.gamma * alpha * next.log_pi[r];
        const Tensor2<float> target =
            project_target(st.grid, std::span<const float>(shifted), cfg.gamma,
                           std::span<const float>(batch.bootstrap_mask), dn.probs);

        auto [out1, tape1] = mlp_forward(st.critics.q1, joined);
        auto [loss1, g1] = cross_entropy_loss(out1, target);
        adam_step(st.critics.q1, mlp_backward(st.critics.q1, tape1, g1), st.adam_q1);
        auto [out2, tape2] = mlp_forward(st.critics.q2, joined);
        auto [loss2, g2] = cross_entropy_loss(out2, target);
        adam_step(st.critics.q2, mlp_backward(st.critics.q2, tape2, g2), st.adam_q2);
        res.critic_loss = 0.5f * (loss1 + loss2);
        const auto ev = expected_value(CategoricalDistribution<float>{st.grid, softmax_rows(out1)});
        double acc = 0.0;
        for (float v : ev) acc += v;
        res.mean_q = static_cast<float>(acc / B);
    } else {
        auto [tq1, tq2] = critic_forward(st.targets.critics, batch.next_privileged_obs, next.actions);
        const std::vector<float> qn = detail::combine_scalar_q(tq1, tq2, mode);
        std::vector<float> y(B);
        for (int r = 0; r < B; ++r)
            y[r] = batch.reward[r] +
                   cfg.gamma * batch.bootstrap_mask[r] * (qn[r] - alpha * next.log_pi[r]);
        double loss_acc = 0.0;
        double q_acc = 0.0;
        for (auto* critic : {&st.critics.q1, &st.critics.q2}) {
            auto [out, tape] = mlp_forward(*critic, joined);
            Tensor2<float> g(B, 1);
            for (int r = 0; r < B; ++r) {
                const float err = out(r, 0) - y[r];
                loss_acc += static_cast<double>(err) * err;
                g(r, 0) = 2.0f * err / B;
            }
            if (critic == &st.critics.q1)
                for (int r = 0; r < B; ++r) q_acc += out(r, 0);
            auto& adam = critic == &st.critics.q1 ? st.adam_q1 : st.adam_q2;
            adam_step(*critic, mlp_backward(*critic, tape, g), adam);
        }
        res.critic_loss = static_cast<float>(loss_acc / (2.0 * B));
        res.mean_q = static_cast<float>(q_acc / B);
    }
    if (!std::isfinite(res.critic_loss)) throw NumericError("sac_update: non-finite critic loss");

    // actor: minimize alpha * log pi - min(E[q1], E[q2]), reparameterized
    auto [head, actor_tape] = mlp_forward(st.actor.mlp, batch.obs);
    detail::SacSample cur = detail::sac_sample(head, update_rng);
    const int A = st.task.action_dim;
    const int priv_dim = batch.privileged_obs.cols;
    const Tensor2<float> joined_pi = hcat(batch.privileged_obs, cur.actions);

    auto [o1, t1] = mlp_forward(st.critics.q1, joined_pi);
    auto [o2, t2] = mlp_forward(st.critics.q2, joined_pi);
    std::vector<float> e1(B), e2(B);
    Tensor2<float> p1, p2;
    if (cfg.distributional) {
        p1 = softmax_rows(o1);
        p2 = softmax_rows(o2);
        e1 = expected_value(CategoricalDistribution<float>{st.grid, p1});
        e2 = expected_value(CategoricalDistribution<float>{st.grid, p2});
    } else {
        for (int r = 0; r < B; ++r) {
            e1[r] = o1(r, 0);
            e2[r] = o2(r, 0);
        }
    }

    // dE/da for the per-row smaller critic only
    Tensor2<float> dq_da(B, A);
    for (int which = 0; which < 2; ++which) {
        auto& out = which == 0 ? o1 : o2;
        auto& probs = which == 0 ? p1 : p2;
        auto& tape = which == 0 ? t1 : t2;
        auto* critic = which == 0 ? &st.critics.q1 : &st.critics.q2;
        Tensor2<float> dlogits(B, out.cols);
        bool any = false;
        for (int r = 0; r < B; ++r) {
            const bool chosen = (which == 0) ? (e1[r] <= e2[r]) : (e2[r] < e1[r]);
            if (!chosen) continue;
            any = true;
            if (cfg.distributional) {
                auto pr = probs.row(r);
                auto gr = dlogits.row(r);
                const float ev = which == 0 ? e1[r] : e2[r];
                for (int j = 0; j < out.cols; ++j) gr[j] = pr[j] * (st.grid.atoms[j] - ev);
            } else {
                dlogits(r, 0) = 1.0f;
            }
        }
        if (!any) continue;
        MlpGrads<float> cg = mlp_backward(*critic, tape, dlogits);
        for (int r = 0; r < B; ++r) {
            auto src = cg.input_grad.row(r);
            auto dst = dq_da.row(r);
            for (int d = 0; d < A; ++d) dst[d] += src[priv_dim + d];
        }
    }

    Tensor2<float> head_grad(B, 2 * A);
    double actor_loss_acc = 0.0;
    const float inv_b = 1.0f / B;
    for (int r = 0; r < B; ++r) {
        actor_loss_acc += alpha * cur.log_pi[r] - std::min(e1[r], e2[r]);
        auto hg = head_grad.row(r);
        for (int d = 0; d < A; ++d) {
            const float a = cur.actions(r, d);
            const float t = 1.0f - a * a;
            const float dlogpi_du = 2.0f * a * t / (t + detail::kTanhEps);
            const float du = inv_b * (alpha * dlogpi_du - dq_da(r, d) * t);
            hg[d] = du;
            hg[A + d] =
                (du * (cur.u(r, d) - cur.mean(r, d)) - inv_b * alpha) * cur.clamp_mask(r, d);
        }
    }
    adam_step(st.actor.mlp, mlp_backward(st.actor.mlp, actor_tape, head_grad), st.adam_actor);
    res.actor_loss = static_cast<float>(actor_loss_acc / B);
    if (!std::isfinite(*res.actor_loss)) throw NumericError("sac_update: non-finite actor loss");

    // temperature: gradient of -log_alpha * (log_pi + target_entropy), target = -action_dim
    const float target_entropy = -static_cast<float>(A);
    double lp_acc = 0.0;
    for (float lp : cur.log_pi) lp_acc += lp;
    const float alpha_grad = -static_cast<float>(lp_acc / B + target_entropy);
    st.alpha_steps += 1;
    st.alpha_m = 0.9f * st.alpha_m + 0.1f * alpha_grad;
    st.alpha_v = 0.999f * st.alpha_v + 0.001f * alpha_grad * alpha_grad;
    const float mhat = st.alpha_m / (1.0f - std::pow(0.9f, static_cast<float>(st.alpha_steps)));
    const float vhat = st.alpha_v / (1.0f - std::pow(0.999f, static_cast<float>(st.alpha_steps)));
    st.log_alpha -= cfg.lr * mhat / (std::sqrt(vhat) + 1e-8f);
    res.alpha = std::exp(st.log_alpha);

    polyak_update(st.targets.critics.q1, st.critics.q1, cfg.tau);
    polyak_update(st.targets.critics.q2, st.critics.q2, cfg.tau);
    return res;
}

// ---------------------------------------------------------------------------
// Evaluation

struct EvalStats {
    double return_mean = 0.0;
    double return_std = 0.0;
    double mean_len = 0.0;
};

// Deterministic policy on fresh envs (FastSAC uses the mean action). Returns
// undiscounted per-episode return stats; each env runs exactly one episode.
inline EvalStats evaluate(const ActorNet<float>& actor, bool sac_head, const TaskSpec& spec,
                          int episodes, uint64_t seed) {
    if (episodes < 1) throw ConfigError("evaluate: episodes must be >= 1");
    VecEnv env(spec, episodes, splitmix64(seed ^ detail::kEvalSalt));
    std::vector<double> returns(episodes, 0.0);
    std::vector<int> lens(episodes, 0);
    std::vector<uint8_t> done(episodes, 0);
    const int A = spec.action_dim;
    for (int t = 0; t < spec.episode_limit; ++t) {
        const Tensor2<float> head = actor_forward(actor, env.obs());
        Tensor2<float> actions(episodes, A);
        if (sac_head) {
            for (int e = 0; e < episodes; ++e)
                for (int d = 0; d < A; ++d) actions(e, d) = std::tanh(head(e, d));
        } else {
            actions = head;
        }
        const StepResult res = env.step(actions);
        bool all_done = true;
        for (int e = 0; e < episodes; ++e) {
            if (!done[e]) {
                returns[e] += res.reward[e];
                lens[e] += 1;
                if (res.terminated[e] || res.truncated[e]) done[e] = 1;
            }
            all_done = all_done && done[e];
        }
        if (all_done) break;
    }
    EvalStats stats;
    for (int e = 0; e < episodes; ++e) {
        stats.return_mean += returns[e];
        stats.mean_len += lens[e];
    }
    stats.return_mean /= episodes;
    stats.mean_len /= episodes;
    double var = 0.0;
    for (int e = 0; e < episodes; ++e) {
        const double d = returns[e] - stats.return_mean;
        var += d * d;
    }
    stats.return_std = std::sqrt(var / episodes);
    return stats;
}

// ---------------------------------------------------------------------------
// train

struct TrainResult {
    TrainState state;
    long long parallel_steps = 0;
    long long update_calls = 0;
    std::vector<MetricsRow> metrics;
    long long steps_to_threshold = -1;  // env steps at the first eval over the solved threshold
    double wall_seconds = 0.0;
};

inline TrainResult train(const TrainConfig& cfg, MetricsWriter* writer = nullptr) {
    cfg.validate();
    if (cfg.deterministic) openblas_set_num_threads(1);

    TrainResult result;
    result.state = init_train_state(cfg);
    TrainState& st = result.state;
    const TaskSpec& spec = st.task;
    const bool sac = cfg.agent == "fastsac";
    const int E = cfg.num_envs;
    const int A = spec.action_dim;

    VecEnv env(spec, E, cfg.seed);
    ReplayBuffer<float> buffer(E, cfg.buffer_n, spec.obs_dim, spec.critic_obs_dim, A);

    std::vector<RngStream> noise_streams, sigma_streams, warmup_streams;
    for (int e = 0; e < E; ++e) {
        noise_streams.push_back(derive_stream(cfg.seed, e, detail::kNoisePurpose));
        sigma_streams.push_back(derive_stream(cfg.seed, e, detail::kSigmaPurpose));
        warmup_streams.push_back(derive_stream(cfg.seed, e, detail::kWarmupPurpose));
    }
    RngStream update_rng = derive_stream(cfg.seed, 0, detail::kUpdatePurpose);
    RngStream sample_rng = derive_stream(cfg.seed, 0, detail::kSamplePurpose);

    NoiseSchedule noise;
    noise.sigma_min = cfg.sigma_min;
    noise.sigma_max = cfg.sigma_max;
    noise.resample_policy = cfg.sigma_resample == "fixed" ? ResamplePolicy::fixed
                                                          : ResamplePolicy::on_reset;
    noise.per_env_sigmas =
        sample_env_sigmas(E, cfg.sigma_min, cfg.sigma_max, std::span<RngStream>(sigma_streams));

    const long long total_parallel_steps = (cfg.total_steps + E - 1) / E;
    const long long warmup = cfg.resolved_warmup();
    long long env_steps = 0;
    long long eval_bucket = 0;
    UpdateResult last{};
    double last_actor_loss = 0.0;
    const auto t0 = std::chrono::steady_clock::now();

    Tensor2<float> obs = env.obs();
    Tensor2<float> priv = env.privileged_obs();

    for (long long t = 0; t < total_parallel_steps; ++t) {
        Tensor2<float> actions(E, A);
        if (env_steps < warmup) {
            for (int e = 0; e < E; ++e)
                for (int d = 0; d < A; ++d)
                    actions(e, d) = static_cast<float>(warmup_streams[e].uniform(-1.0, 1.0));
        } else if (sac) {
            const Tensor2<float> head = mlp_forward(st.actor.mlp, obs).first;
            for (int e = 0; e < E; ++e) {
                for (int d = 0; d < A; ++d) {
                    const float ls = std::min(std::max(head(e, A + d), detail::kLogStdMin),
                                              detail::kLogStdMax);
                    const float xi = static_cast<float>(noise_streams[e].normal());
                    actions(e, d) = std::tanh(head(e, d) + std::exp(ls) * xi);
                }
            }
        } else {
            actions = apply_exploration_noise(actor_forward(st.actor, obs), noise.per_env_sigmas,
                                              std::span<RngStream>(noise_streams));
        }

        const StepResult sr = env.step(actions);
        TransitionBatch<float> tb;
        tb.obs = obs;
        tb.privileged_obs = priv;
        tb.action = actions;
        tb.reward = sr.reward;
        tb.next_obs = Tensor2<float>(E, spec.obs_dim);
        tb.next_privileged_obs = Tensor2<float>(E, spec.critic_obs_dim);
        tb.bootstrap_mask.assign(E, 1.0f);
        for (int e = 0; e < E; ++e) {
            const bool ended = sr.terminated[e] || sr.truncated[e];
            const auto& src_obs = ended ? sr.final_obs : sr.next_obs;
            const auto& src_priv = ended ? sr.final_privileged_obs : sr.next_privileged_obs;
            for (int c = 0; c < spec.obs_dim; ++c) tb.next_obs(e, c) = src_obs(e, c);
            for (int c = 0; c < spec.critic_obs_dim; ++c)
                tb.next_privileged_obs(e, c) = src_priv(e, c);
            tb.bootstrap_mask[e] = sr.terminated[e] ? 0.0f : 1.0f;
            if (ended && noise.resample_policy == ResamplePolicy::on_reset)
                noise.per_env_sigmas[e] =
                    sample_sigma(cfg.sigma_min, cfg.sigma_max, sigma_streams[e]);
        }
        buffer.insert(tb);
        obs = sr.next_obs;
        priv = sr.next_privileged_obs;
        env_steps += E;
        result.parallel_steps += 1;

        if (env_steps >= warmup) {
            for (int u = 0; u < cfg.utd; ++u) {
                const TransitionBatch<float> batch = buffer.sample(cfg.batch_size, sample_rng);
                try {
                    last = sac ? sac_update(st, batch, cfg, update_rng)
                               : td3_update(st, batch, cfg, update_rng);
                } catch (const NumericError& e) {
                    throw NumericError(std::string(e.what()) + " at env step " +
                                       std::to_string(env_steps));
                }
                if (last.actor_loss) last_actor_loss = *last.actor_loss;
                result.update_calls += 1;
            }
        }

        if (env_steps / cfg.eval_every > eval_bucket) {
            eval_bucket = env_steps / cfg.eval_every;
            const EvalStats es = evaluate(st.actor, sac, spec, cfg.eval_episodes, cfg.seed);
            MetricsRow row;
            row.env_steps = env_steps;
            row.wall_seconds =
                cfg.deterministic
                    ? 0.0
                    : std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            row.critic_loss = last.critic_loss;
            row.actor_loss = last_actor_loss;
            row.mean_q = last.mean_q;
            row.eval_return_mean = es.return_mean;
            row.eval_return_std = es.return_std;
            row.eval_episode_len = es.mean_len;
            if (!std::isfinite(row.critic_loss) || !std::isfinite(row.mean_q) ||
                !std::isfinite(row.eval_return_mean))
                throw NumericError("train: non-finite metrics at env step " +
                                   std::to_string(env_steps));
            if (writer) writer->append(row);
            result.metrics.push_back(row);
            if (result.steps_to_threshold < 0 && es.return_mean >= spec.solved_threshold)
                result.steps_to_threshold = env_steps;
            if (cfg.early_stop && result.steps_to_threshold >= 0) break;
        }
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

}  // namespace fasttd3
