#pragma once

#include <string>
#include <vector>

#include "fasttd3/checkpoint.hpp"
#include "fasttd3/trainer.hpp"

namespace fasttd3 {

// Full training state as named tensor records. Namespaces: actor/, critic1/,
// critic2/, targets/..., adam/... The FastSAC temperature lives under
// actor/log_alpha.
inline std::vector<NamedTensor> state_to_tensors(const TrainState& st, bool sac) {
    std::vector<NamedTensor> out;
    append_mlp_tensors(out, "actor", st.actor.mlp);
    if (sac) out.push_back({"actor/log_alpha", {1}, {st.log_alpha}});
    append_mlp_tensors(out, "critic1", st.critics.q1);
    append_mlp_tensors(out, "critic2", st.critics.q2);
    append_mlp_tensors(out, "targets/actor", st.targets.actor.mlp);
    append_mlp_tensors(out, "targets/critic1", st.targets.critics.q1);
    append_mlp_tensors(out, "targets/critic2", st.targets.critics.q2);
    append_adam_tensors(out, "adam/actor", st.adam_actor);
    append_adam_tensors(out, "adam/critic1", st.adam_q1);
    append_adam_tensors(out, "adam/critic2", st.adam_q2);
    return out;
}

// Load just the actor for evaluation. The head width tells the agent apart:
// action_dim outputs is a deterministic tanh head, 2 x action_dim is a
// FastSAC (mean, log_std) head.
struct LoadedActor {
    ActorNet<float> actor;
    bool sac_head = false;
};

inline LoadedActor load_actor(const std::string& checkpoint_path, const TaskSpec& spec) {
    const std::vector<NamedTensor> tensors = load_checkpoint(checkpoint_path);
    MlpParams<float> mlp = mlp_from_tensors(tensors, "actor", Activation::tanh);
    const int in_dim = mlp.input_dim();
    const int out_dim = mlp.output_dim();
    if (in_dim != spec.obs_dim)
        throw ConfigError("checkpoint actor expects obs_dim " + std::to_string(in_dim) + ", task " +
                          spec.name + " has obs_dim " + std::to_string(spec.obs_dim));
    LoadedActor loaded;
    if (out_dim == spec.action_dim) {
        loaded.sac_head = false;
    } else if (out_dim == 2 * spec.action_dim) {
        loaded.sac_head = true;
        mlp.output_activation = Activation::identity;
    } else {
        throw ConfigError("checkpoint actor head dim " + std::to_string(out_dim) +
                          " does not match task action_dim " + std::to_string(spec.action_dim));
    }
    loaded.actor.mlp = std::move(mlp);
    return loaded;
}

}  // namespace fasttd3
