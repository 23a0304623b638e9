#pragma once

#include <utility>
#include <vector>

#include "fasttd3/distributional.hpp"
#include "fasttd3/mlp.hpp"

namespace fasttd3 {

// Actor and twin distributional critic assemblies. No layer normalization and
// no residual paths. The actor always works in [-1, 1]; task-native scaling
// happens in the environment.

template <typename S>
struct ActorNet {
    MlpParams<S> mlp;  // tanh head for deterministic policies, identity for (mean, log_std) heads
};

template <typename S>
struct CriticPair {
    MlpParams<S> q1;
    MlpParams<S> q2;
    AtomGrid<S> grid;  // shared by both critics; unused when the head is scalar
};

template <typename S>
struct TargetSet {
    ActorNet<S> actor;
    CriticPair<S> critics;
};

inline std::vector<int> scaled_hidden(const std::vector<int>& base, float width_mult) {
    std::vector<int> out;
    out.reserve(base.size());
    for (int h : base) out.push_back(std::max(8, static_cast<int>(h * width_mult + 0.5f)));
    return out;
}

template <typename S>
ActorNet<S> make_actor(int obs_dim, int out_dim, const std::vector<int>& hidden, Activation head,
                       RngStream& rng, S final_layer_scale = S(0.1)) {
    std::vector<int> dims{obs_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out_dim);
    return ActorNet<S>{init_mlp(dims, head, rng, final_layer_scale)};
}

template <typename S>
CriticPair<S> make_critics(int critic_obs_dim, int action_dim, int head_dim, const AtomGrid<S>& grid,
                           const std::vector<int>& hidden, RngStream& rng) {
    std::vector<int> dims{critic_obs_dim + action_dim};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(head_dim);
    CriticPair<S> pair;
    pair.q1 = init_mlp<S>(dims, Activation::identity, rng);
    pair.q2 = init_mlp<S>(dims, Activation::identity, rng);
    pair.grid = grid;
    return pair;
}

template <typename S>
Tensor2<S> actor_forward(const ActorNet<S>& actor, const Tensor2<S>& obs) {
    return mlp_forward(actor.mlp, obs).first;
}

template <typename S>
std::pair<Tensor2<S>, Tensor2<S>> critic_forward(const CriticPair<S>& critics,
                                                 const Tensor2<S>& critic_obs,
                                                 const Tensor2<S>& actions) {
    const Tensor2<S> joined = hcat(critic_obs, actions);
    return {mlp_forward(critics.q1, joined).first, mlp_forward(critics.q2, joined).first};
}

// target <- (1 - tau) * target + tau * online
template <typename S>
void polyak_update(MlpParams<S>& target, const MlpParams<S>& online, S tau) {
    if (!(tau >= S(0) && tau <= S(1))) throw ConfigError("polyak_update: tau must be in [0, 1]");
    if (target.layers.size() != online.layers.size())
        throw ShapeError("polyak_update: layer count mismatch");
    for (size_t l = 0; l < target.layers.size(); ++l) {
        auto& t = target.layers[l];
        const auto& o = online.layers[l];
        if (!t.weight.same_shape(o.weight) || t.bias.size() != o.bias.size())
            throw ShapeError("polyak_update: shape mismatch at layer " + std::to_string(l));
        const S keep = S(1) - tau;
        for (size_t i = 0; i < t.weight.data.size(); ++i)
            t.weight.data[i] = keep * t.weight.data[i] + tau * o.weight.data[i];
        for (size_t i = 0; i < t.bias.size(); ++i) t.bias[i] = keep * t.bias[i] + tau * o.bias[i];
    }
}

}  // namespace fasttd3
