#pragma once

#include <span>
#include <string>
#include <vector>

#include "fasttd3/error.hpp"
#include "fasttd3/rng.hpp"
#include "fasttd3/tensor.hpp"

namespace fasttd3 {

// Mixed exploration noise: each env explores with its own Gaussian scale
// drawn uniformly from [sigma_min, sigma_max]. Noise for env i comes from
// that env's stream only.

enum class ResamplePolicy { on_reset, fixed };

struct NoiseSchedule {
    float sigma_min = 0.1f;
    float sigma_max = 0.4f;
    std::vector<float> per_env_sigmas;
    ResamplePolicy resample_policy = ResamplePolicy::on_reset;
};

inline float sample_sigma(float sigma_min, float sigma_max, RngStream& stream) {
    return static_cast<float>(stream.uniform(sigma_min, sigma_max));
}

inline std::vector<float> sample_env_sigmas(int num_envs, float sigma_min, float sigma_max,
                                            std::span<RngStream> streams) {
    if (!(sigma_min >= 0.0f && sigma_min <= sigma_max))
        throw ConfigError("sample_env_sigmas: need 0 <= sigma_min <= sigma_max, got [" +
                          std::to_string(sigma_min) + ", " + std::to_string(sigma_max) + "]");
    if (streams.size() != static_cast<size_t>(num_envs))
        throw ShapeError("sample_env_sigmas: one stream per env required");
    std::vector<float> sigmas(num_envs);
    for (int e = 0; e < num_envs; ++e) sigmas[e] = sample_sigma(sigma_min, sigma_max, streams[e]);
    return sigmas;
}

// a + N(0, sigma_i^2) per env row, clipped back to [-1, 1].
inline Tensor2<float> apply_exploration_noise(const Tensor2<float>& actions,
                                              std::span<const float> sigmas,
                                              std::span<RngStream> streams) {
    if (sigmas.size() != static_cast<size_t>(actions.rows) || streams.size() != sigmas.size())
        throw ShapeError("apply_exploration_noise: need one sigma and one stream per env row");
    Tensor2<float> out(actions.rows, actions.cols);
    for (int e = 0; e < actions.rows; ++e) {
        auto src = actions.row(e);
        auto dst = out.row(e);
        for (int d = 0; d < actions.cols; ++d) {
            const float noisy = src[d] + sigmas[e] * static_cast<float>(streams[e].normal());
            dst[d] = std::min(std::max(noisy, -1.0f), 1.0f);
        }
    }
    return out;
}

// TD3 target smoothing: a + clip(N(0, sigma^2), -c, c), clipped to [-1, 1].
inline Tensor2<float> target_policy_smoothing(const Tensor2<float>& target_actions, float sigma_target,
                                              float clip_c, RngStream& rng) {
    if (sigma_target < 0.0f || clip_c < 0.0f)
        throw ConfigError("target_policy_smoothing: sigma and clip must be non-negative");
    Tensor2<float> out(target_actions.rows, target_actions.cols);
    for (size_t i = 0; i < out.data.size(); ++i) {
        float eps = sigma_target * static_cast<float>(rng.normal());
        eps = std::min(std::max(eps, -clip_c), clip_c);
        out.data[i] = std::min(std::max(target_actions.data[i] + eps, -1.0f), 1.0f);
    }
    return out;
}

}  // namespace fasttd3
