#include <catch_amalgamated.hpp>

#include <cmath>

#include "fasttd3/mlp.hpp"
#include "support/oracles.hpp"

using namespace fasttd3;

namespace {

// the 2 -> 2 -> 1 net whose output was frozen from a straight-line hand
// evaluation: relu hidden (0.15, -0.3) -> (0.15, 0), out 0.155
template <typename S>
MlpParams<S> frozen_net(Activation head) {
    MlpParams<S> p;
    p.output_activation = head;
    p.layers.push_back({Tensor2<S>(2, 2, {S(0.2), S(-0.3), S(0.5), S(0.1)}), {S(0.3), S(-0.1)}});
    p.layers.push_back({Tensor2<S>(2, 1, {S(0.7), S(-0.4)}), {S(0.05)}});
    return p;
}

template <typename S>
MlpParams<S> random_net(const std::vector<int>& dims, Activation head, uint64_t seed) {
    RngStream rng = derive_stream(seed, 0);
    return init_mlp<S>(dims, head, rng);
}

}  // namespace

TEST_CASE("forward: zero weights with tanh head give zero output", "[mlp]") {
    MlpParams<float> p;
    p.output_activation = Activation::tanh;
    p.layers.push_back({Tensor2<float>(3, 4), std::vector<float>(4, 0.0f)});
    p.layers.push_back({Tensor2<float>(4, 2), std::vector<float>(2, 0.0f)});
    Tensor2<float> in(5, 3);
    RngStream rng = derive_stream(1, 0);
    for (auto& v : in.data) v = static_cast<float>(rng.uniform(-3.0, 3.0));
    auto [out, tape] = mlp_forward(p, in);
    for (float v : out.data) REQUIRE(v == 0.0f);
}

TEST_CASE("forward: identity-sized single layer passes input through", "[mlp]") {
    MlpParams<float> p;
    p.layers.push_back({Tensor2<float>(2, 2, {1, 0, 0, 1}), {0.0f, 0.0f}});
    auto [out, tape] = mlp_forward(p, Tensor2<float>(1, 2, {1.0f, 2.0f}));
    REQUIRE(out(0, 0) == 1.0f);
    REQUIRE(out(0, 1) == 2.0f);
}

TEST_CASE("forward: 2-2-1 net matches the hand-evaluated value", "[mlp]") {
    auto [out, tape] = mlp_forward(frozen_net<double>(Activation::identity),
                                   Tensor2<double>(1, 2, {0.5, -0.5}));
    REQUIRE_THAT(out(0, 0), Catch::Matchers::WithinAbs(0.155, 1e-12));
    auto [out_t, tape_t] =
        mlp_forward(frozen_net<double>(Activation::tanh), Tensor2<double>(1, 2, {0.5, -0.5}));
    REQUIRE_THAT(out_t(0, 0), Catch::Matchers::WithinAbs(0.15377052226409266, 1e-12));
}

TEST_CASE("forward: errors on shape mismatch and non-finite output", "[mlp]") {
    auto p = frozen_net<float>(Activation::identity);
    REQUIRE_THROWS_AS(mlp_forward(p, Tensor2<float>(1, 3)), ShapeError);
    p.layers[0].weight(0, 0) = INFINITY;
    REQUIRE_THROWS_AS(mlp_forward(p, Tensor2<float>(1, 2, {1.0f, 1.0f})), NumericError);
}

TEST_CASE("backward: zero cotangent gives zero grads", "[mlp]") {
    auto p = random_net<float>({3, 8, 2}, Activation::tanh, 5);
    Tensor2<float> in(4, 3);
    RngStream rng = derive_stream(6, 0);
    for (auto& v : in.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto [out, tape] = mlp_forward(p, in);
    const MlpGrads<float> g = mlp_backward(p, tape, Tensor2<float>(4, 2));
    for (const auto& layer : g.layers) {
        for (float v : layer.weight.data) REQUIRE(v == 0.0f);
        for (float v : layer.bias) REQUIRE(v == 0.0f);
    }
    for (float v : g.input_grad.data) REQUIRE(v == 0.0f);
}

TEST_CASE("backward: single linear layer has the closed-form gradient", "[mlp]") {
    // y = x W + b; dL/dW = sum_batch x^T g
    MlpParams<double> p;
    p.layers.push_back({Tensor2<double>(2, 2, {0.3, -0.2, 0.8, 0.5}), {0.1, -0.1}});
    Tensor2<double> x(2, 2, {1.0, 2.0, -1.5, 0.5});
    Tensor2<double> g(2, 2, {0.25, -0.75, 1.0, 0.5});
    auto [out, tape] = mlp_forward(p, x);
    const MlpGrads<double> grads = mlp_backward(p, tape, g);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double expect = x(0, i) * g(0, j) + x(1, i) * g(1, j);
            REQUIRE_THAT(grads.layers[0].weight(i, j), Catch::Matchers::WithinAbs(expect, 1e-14));
        }
    REQUIRE_THAT(grads.layers[0].bias[0], Catch::Matchers::WithinAbs(g(0, 0) + g(1, 0), 1e-14));
    // input grad of a linear layer is g W^T
    for (int r = 0; r < 2; ++r)
        for (int i = 0; i < 2; ++i) {
            const double expect = g(r, 0) * p.layers[0].weight(i, 0) + g(r, 1) * p.layers[0].weight(i, 1);
            REQUIRE_THAT(grads.input_grad(r, i), Catch::Matchers::WithinAbs(expect, 1e-14));
        }
}

TEST_CASE("backward: tape is consumed exactly once", "[mlp]") {
    auto p = random_net<float>({2, 4, 1}, Activation::identity, 8);
    Tensor2<float> in(1, 2, {0.5f, 0.5f});
    auto [out, tape] = mlp_forward(p, in);
    Tensor2<float> g(1, 1, {1.0f});
    (void)mlp_backward(p, tape, g);
    REQUIRE_THROWS_AS(mlp_backward(p, tape, g), StateError);
}

TEST_CASE("gradients match central finite differences", "[mlp]") {
    // randomized small nets, 64-bit mode, worst relative error < 1e-4
    RngStream meta = derive_stream(11, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const int in_dim = 2 + static_cast<int>(meta.next_index(3));
        const int hidden = 4 + static_cast<int>(meta.next_index(12));
        const Activation head = trial % 2 == 0 ? Activation::tanh : Activation::identity;
        auto [p, in] = oracles::kink_clear_net<double>({in_dim, hidden, hidden, 3}, head, 100 + trial);
        RngStream rng = derive_stream(200 + trial, 0);
        Tensor2<double> targets(in.rows, 3);
        for (auto& v : targets.data) v = rng.uniform(-1.0, 1.0);
        auto loss = [&](const Tensor2<double>& out) {
            double l = 0.0;
            Tensor2<double> g(out.rows, out.cols);
            for (size_t i = 0; i < out.data.size(); ++i) {
                const double d = out.data[i] - targets.data[i];
                l += 0.5 * d * d;
                g.data[i] = d;
            }
            return std::make_pair(l, g);
        };
        const double err = finite_difference_check(p, in, loss, 1e-3);
        REQUIRE(err < 1e-4);
    }
}

TEST_CASE("finite differences in 32-bit mode stay under 1e-2", "[mlp]") {
    auto [p, in] = oracles::kink_clear_net<float>({3, 8, 8, 2}, Activation::tanh, 55);
    auto loss = [&](const Tensor2<float>& out) {
        float l = 0.0f;
        Tensor2<float> g(out.rows, out.cols);
        for (size_t i = 0; i < out.data.size(); ++i) {
            l += 0.5f * out.data[i] * out.data[i];
            g.data[i] = out.data[i];
        }
        return std::make_pair(l, g);
    };
    REQUIRE(finite_difference_check(p, in, loss, 1e-3f) < 1e-2f);
}

TEST_CASE("finite_difference_check edge cases", "[mlp]") {
    // quadratic loss on a linear net: central differences are exact
    MlpParams<double> p;
    p.layers.push_back({Tensor2<double>(2, 1, {0.4, -0.7}), {0.2}});
    Tensor2<double> in(3, 2, {1.0, 0.5, -0.5, 2.0, 0.0, -1.0});
    auto quad = [&](const Tensor2<double>& out) {
        double l = 0.0;
        Tensor2<double> g(out.rows, out.cols);
        for (size_t i = 0; i < out.data.size(); ++i) {
            l += 0.5 * out.data[i] * out.data[i];
            g.data[i] = out.data[i];
        }
        return std::make_pair(l, g);
    };
    REQUIRE(finite_difference_check(p, in, quad, 1e-3) < 1e-6);

    auto zero = [&](const Tensor2<double>& out) {
        return std::make_pair(0.0, Tensor2<double>(out.rows, out.cols));
    };
    REQUIRE(finite_difference_check(p, in, zero, 1e-3) == 0.0);

    auto tanh_net = frozen_net<double>(Activation::tanh);
    REQUIRE(finite_difference_check(tanh_net, Tensor2<double>(1, 2, {0.5, -0.5}), quad, 1e-3) < 1e-4);

    REQUIRE_THROWS_AS(finite_difference_check(p, in, quad, 0.0), ConfigError);
}

TEST_CASE("forward is deterministic and shapes are closed", "[mlp]") {
    auto p = random_net<float>({4, 16, 16, 3}, Activation::tanh, 77);
    Tensor2<float> in(8, 4);
    RngStream rng = derive_stream(78, 0);
    for (auto& v : in.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
    auto [o1, t1] = mlp_forward(p, in);
    auto [o2, t2] = mlp_forward(p, in);
    REQUIRE(o1.data == o2.data);  // bit-identical

    Tensor2<float> g(8, 3);
    for (auto& v : g.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    const MlpGrads<float> grads = mlp_backward(p, t1, g);
    REQUIRE(grads.layers.size() == p.layers.size());
    for (size_t l = 0; l < p.layers.size(); ++l) {
        REQUIRE(grads.layers[l].weight.same_shape(p.layers[l].weight));
        REQUIRE(grads.layers[l].bias.size() == p.layers[l].bias.size());
    }
}

TEST_CASE("adam: zero grads leave params in place", "[mlp]") {
    auto p = random_net<float>({2, 4, 1}, Activation::identity, 21);
    const auto before = p;
    AdamState<float> st = make_adam_state(p, 0.1f);
    MlpGrads<float> g;
    for (const auto& layer : p.layers)
        g.layers.push_back({Tensor2<float>(layer.weight.rows, layer.weight.cols),
                            std::vector<float>(layer.bias.size(), 0.0f)});
    adam_step(p, g, st);
    REQUIRE(st.step_count == 1);
    for (size_t l = 0; l < p.layers.size(); ++l) {
        REQUIRE(p.layers[l].weight.data == before.layers[l].weight.data);
        for (float v : st.m[l].weight.data) REQUIRE(v == 0.0f);
        for (float v : st.v[l].weight.data) REQUIRE(v == 0.0f);
    }
}

TEST_CASE("adam: first step moves by lr in the sign direction", "[mlp]") {
    MlpParams<float> p;
    p.layers.push_back({Tensor2<float>(1, 1, {0.0f}), {0.0f}});
    AdamState<float> st = make_adam_state(p, 0.1f);
    MlpGrads<float> g;
    g.layers.push_back({Tensor2<float>(1, 1, {1.0f}), {0.0f}});
    adam_step(p, g, st);
    // bias-corrected first step: -lr * 1 / (1 + eps)
    REQUIRE_THAT(p.layers[0].weight(0, 0), Catch::Matchers::WithinAbs(-0.1, 1e-6));
}

TEST_CASE("adam: repeated identical grads keep descending", "[mlp]") {
    MlpParams<float> p;
    p.layers.push_back({Tensor2<float>(1, 1, {0.5f}), {0.0f}});
    AdamState<float> st = make_adam_state(p, 0.01f);
    MlpGrads<float> g;
    g.layers.push_back({Tensor2<float>(1, 1, {2.0f}), {0.0f}});
    float prev = p.layers[0].weight(0, 0);
    for (int i = 0; i < 5; ++i) {
        adam_step(p, g, st);
        REQUIRE(p.layers[0].weight(0, 0) < prev);
        prev = p.layers[0].weight(0, 0);
    }
    REQUIRE(st.step_count == 5);
}

TEST_CASE("adam: refuses non-finite grads and keeps state", "[mlp]") {
    MlpParams<float> p;
    p.layers.push_back({Tensor2<float>(1, 1, {0.5f}), {0.1f}});
    AdamState<float> st = make_adam_state(p, 0.01f);
    MlpGrads<float> g;
    g.layers.push_back({Tensor2<float>(1, 1, {NAN}), {0.0f}});
    REQUIRE_THROWS_AS(adam_step(p, g, st), NumericError);
    REQUIRE(st.step_count == 0);
    REQUIRE(p.layers[0].weight(0, 0) == 0.5f);
}
