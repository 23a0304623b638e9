#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fasttd3/error.hpp"
#include "fasttd3/rng.hpp"
#include "fasttd3/tensor.hpp"

namespace fasttd3 {

// Dense MLP kernel with hand-rolled reverse mode. Hidden layers are ReLU;
// the output head is identity or tanh. Gradients are summed over the batch,
// so any 1/batch scaling belongs in the loss gradient.

enum class Activation { identity, tanh };

template <typename S>
struct DenseLayer {
    Tensor2<S> weight;    // [in_dim x out_dim]
    std::vector<S> bias;  // [out_dim]
};

template <typename S>
struct MlpParams {
    std::vector<DenseLayer<S>> layers;
    Activation output_activation = Activation::identity;

    int input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows; }
    int output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols; }
};

// One forward pass worth of intermediates. pre[l] holds the affine output of
// layer l, post[l] its activation (post.back() is the network output).
// A tape feeds exactly one backward pass.
template <typename S>
struct GradTape {
    Tensor2<S> input;
    std::vector<Tensor2<S>> pre;
    std::vector<Tensor2<S>> post;
    bool consumed = false;
};

template <typename S>
struct MlpGrads {
    std::vector<DenseLayer<S>> layers;  // same shapes as the parameters
    Tensor2<S> input_grad;              // [batch x in_dim]
};

namespace detail {

template <typename S>
void check_chain(const MlpParams<S>& params) {
    if (params.layers.empty()) throw ShapeError("mlp: no layers");
    for (size_t l = 0; l + 1 < params.layers.size(); ++l) {
        if (params.layers[l].weight.cols != params.layers[l + 1].weight.rows)
            throw ShapeError("mlp: layer " + std::to_string(l) + " output dim " +
                             std::to_string(params.layers[l].weight.cols) + " != layer " +
                             std::to_string(l + 1) + " input dim " +
                             std::to_string(params.layers[l + 1].weight.rows));
    }
    for (size_t l = 0; l < params.layers.size(); ++l)
        if (params.layers[l].bias.size() != static_cast<size_t>(params.layers[l].weight.cols))
            throw ShapeError("mlp: layer " + std::to_string(l) + " bias length mismatch");
}

}  // namespace detail

template <typename S>
std::pair<Tensor2<S>, GradTape<S>> mlp_forward(const MlpParams<S>& params, const Tensor2<S>& input) {
    detail::check_chain(params);
    if (input.cols != params.input_dim())
        throw ShapeError("mlp_forward: input cols " + std::to_string(input.cols) + " != input dim " +
                         std::to_string(params.input_dim()));

    GradTape<S> tape;
    tape.input = input;
    tape.pre.reserve(params.layers.size());
    tape.post.reserve(params.layers.size());

    const Tensor2<S>* h = &input;
    for (size_t l = 0; l < params.layers.size(); ++l) {
        const auto& layer = params.layers[l];
        Tensor2<S> z = matmul(*h, layer.weight);
        for (int r = 0; r < z.rows; ++r) {
            auto zr = z.row(r);
            for (int c = 0; c < z.cols; ++c) zr[c] += layer.bias[c];
        }
        Tensor2<S> act = z;
        const bool last = (l + 1 == params.layers.size());
        if (!last) {
            for (S& v : act.data) v = v > S(0) ? v : S(0);
        } else if (params.output_activation == Activation::tanh) {
            for (S& v : act.data) v = std::tanh(v);
        }
        tape.pre.push_back(std::move(z));
        tape.post.push_back(std::move(act));
        h = &tape.post.back();
    }

    Tensor2<S> output = tape.post.back();
    if (!all_finite(output)) throw NumericError("mlp_forward: non-finite output");
    return {std::move(output), std::move(tape)};
}

template <typename S>
MlpGrads<S> mlp_backward(const MlpParams<S>& params, GradTape<S>& tape, const Tensor2<S>& output_grad) {
    const size_t L = params.layers.size();
    if (tape.pre.size() != L || tape.post.size() != L)
        throw ShapeError("mlp_backward: tape does not match params");
    if (tape.input.cols != params.input_dim())
        throw ShapeError("mlp_backward: tape input dim mismatch");
    if (output_grad.rows != tape.input.rows || output_grad.cols != params.output_dim())
        throw ShapeError("mlp_backward: output_grad shape mismatch");
    if (tape.consumed) throw StateError("mlp_backward: tape already consumed");
    tape.consumed = true;

    MlpGrads<S> grads;
    grads.layers.resize(L);

    Tensor2<S> dz = output_grad;
    if (params.output_activation == Activation::tanh) {
        const auto& y = tape.post.back();
        for (size_t i = 0; i < dz.data.size(); ++i) dz.data[i] *= (S(1) - y.data[i] * y.data[i]);
    }

    for (size_t l = L; l-- > 0;) {
        const Tensor2<S>& h_in = (l == 0) ? tape.input : tape.post[l - 1];
        grads.layers[l].weight = matmul(h_in, dz, /*trans_a=*/true);
        grads.layers[l].bias.assign(dz.cols, S(0));
        for (int r = 0; r < dz.rows; ++r) {
            auto row = dz.row(r);
            for (int c = 0; c < dz.cols; ++c) grads.layers[l].bias[c] += row[c];
        }
        Tensor2<S> dprev = matmul(dz, params.layers[l].weight, false, /*trans_b=*/true);
        if (l == 0) {
            grads.input_grad = std::move(dprev);
        } else {
            const Tensor2<S>& z_prev = tape.pre[l - 1];
            for (size_t i = 0; i < dprev.data.size(); ++i)
                if (z_prev.data[i] <= S(0)) dprev.data[i] = S(0);
            dz = std::move(dprev);
        }
    }
    return grads;
}

// ---------------------------------------------------------------------------
// Adam

template <typename S>
struct AdamState {
    std::vector<DenseLayer<S>> m;  // first moments, zero-initialized
    std::vector<DenseLayer<S>> v;  // second moments
    int64_t step_count = 0;
    S lr = S(3e-4);
    S beta1 = S(0.9);
    S beta2 = S(0.999);
    S epsilon = S(1e-8);
};

template <typename S>
AdamState<S> make_adam_state(const MlpParams<S>& params, S lr = S(3e-4)) {
    AdamState<S> st;
    st.lr = lr;
    for (const auto& layer : params.layers) {
        DenseLayer<S> zero{Tensor2<S>(layer.weight.rows, layer.weight.cols),
                           std::vector<S>(layer.bias.size(), S(0))};
        st.m.push_back(zero);
        st.v.push_back(std::move(zero));
    }
    return st;
}

template <typename S>
void adam_step(MlpParams<S>& params, const MlpGrads<S>& grads, AdamState<S>& state) {
    const size_t L = params.layers.size();
    if (grads.layers.size() != L || state.m.size() != L)
        throw ShapeError("adam_step: layer count mismatch");
    for (size_t l = 0; l < L; ++l) {
        if (!grads.layers[l].weight.same_shape(params.layers[l].weight) ||
            grads.layers[l].bias.size() != params.layers[l].bias.size())
            throw ShapeError("adam_step: gradient shape mismatch at layer " + std::to_string(l));
        if (!all_finite(grads.layers[l].weight) ||
            !all_finite(std::span<const S>(grads.layers[l].bias)))
            throw NumericError("adam_step: non-finite gradient at layer " + std::to_string(l));
    }

    state.step_count += 1;
    const S bc1 = S(1) - std::pow(state.beta1, static_cast<S>(state.step_count));
    const S bc2 = S(1) - std::pow(state.beta2, static_cast<S>(state.step_count));

    auto update = [&](S& p, S g, S& m, S& v) {
        m = state.beta1 * m + (S(1) - state.beta1) * g;
        v = state.beta2 * v + (S(1) - state.beta2) * g * g;
        const S mhat = m / bc1;
        const S vhat = v / bc2;
        p -= state.lr * mhat / (std::sqrt(vhat) + state.epsilon);
    };

    for (size_t l = 0; l < L; ++l) {
        auto& layer = params.layers[l];
        const auto& g = grads.layers[l];
        for (size_t i = 0; i < layer.weight.data.size(); ++i)
            update(layer.weight.data[i], g.weight.data[i], state.m[l].weight.data[i],
                   state.v[l].weight.data[i]);
        for (size_t i = 0; i < layer.bias.size(); ++i)
            update(layer.bias[i], g.bias[i], state.m[l].bias[i], state.v[l].bias[i]);
    }
}

// ---------------------------------------------------------------------------
// Init and gradient verification

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; the final layer can be
// scaled down (actors start near zero actions).
template <typename S>
MlpParams<S> init_mlp(const std::vector<int>& dims, Activation output_activation, RngStream& rng,
                      S final_layer_scale = S(1)) {
    if (dims.size() < 2) throw ConfigError("init_mlp: need at least input and output dims");
    MlpParams<S> params;
    params.output_activation = output_activation;
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        const int fan_in = dims[l];
        const int fan_out = dims[l + 1];
        const S bound = S(1) / std::sqrt(static_cast<S>(fan_in));
        const S scale = (l + 2 == dims.size()) ? final_layer_scale : S(1);
        DenseLayer<S> layer{Tensor2<S>(fan_in, fan_out), std::vector<S>(fan_out)};
        for (S& w : layer.weight.data) w = scale * static_cast<S>(rng.uniform(-bound, bound));
        for (S& b : layer.bias) b = scale * static_cast<S>(rng.uniform(-bound, bound));
        params.layers.push_back(std::move(layer));
    }
    return params;
}

// Compare analytic gradients against central finite differences of the same
// scalar loss. loss_fn maps the network output to (loss, dloss/doutput).
// Returns the worst |analytic - numeric| / max(1, |analytic|, |numeric|).
template <typename S, typename LossFn>
S finite_difference_check(const MlpParams<S>& params, const Tensor2<S>& input, LossFn&& loss_fn, S h) {
    if (h <= S(0)) throw ConfigError("finite_difference_check: h must be positive");

    auto [output, tape] = mlp_forward(params, input);
    auto [loss0, output_grad] = loss_fn(output);
    (void)loss0;
    MlpGrads<S> analytic = mlp_backward(params, tape, output_grad);

    MlpParams<S> probe = params;
    auto eval = [&]() -> S {
        auto [out, t] = mlp_forward(probe, input);
        (void)t;
        return loss_fn(out).first;
    };

    S worst = S(0);
    auto probe_one = [&](S& p, S a) {
        const S saved = p;
        p = saved + h;
        const S lp = eval();
        p = saved - h;
        const S lm = eval();
        p = saved;
        const S n = (lp - lm) / (S(2) * h);
        const S denom = std::max(S(1), std::max(std::abs(a), std::abs(n)));
        worst = std::max(worst, std::abs(a - n) / denom);
    };

    for (size_t l = 0; l < probe.layers.size(); ++l) {
        auto& layer = probe.layers[l];
        for (size_t i = 0; i < layer.weight.data.size(); ++i)
            probe_one(layer.weight.data[i], analytic.layers[l].weight.data[i]);
        for (size_t i = 0; i < layer.bias.size(); ++i)
            probe_one(layer.bias[i], analytic.layers[l].bias[i]);
    }
    return worst;
}

}  // namespace fasttd3
