#include <catch_amalgamated.hpp>

#include <cmath>

#include "fasttd3/rng.hpp"
#include "fasttd3/tensor.hpp"

using namespace fasttd3;

TEST_CASE("streams are counter-based and order-independent", "[rng]") {
    RngStream a = derive_stream(42, 0);
    RngStream b = derive_stream(42, 0);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());

    // a draw depends only on (key, counter), not on other streams' usage
    RngStream c = derive_stream(42, 1);
    RngStream d = derive_stream(42, 1);
    (void)c.next_u64();
    RngStream other = derive_stream(42, 2);
    for (int i = 0; i < 10; ++i) (void)other.next_u64();
    (void)d.next_u64();
    REQUIRE(c.next_u64() == d.next_u64());

    // different ids and purposes give different sequences
    REQUIRE(derive_stream(42, 0).next_u64() != derive_stream(42, 1).next_u64());
    REQUIRE(derive_stream(42, 0, 1).next_u64() != derive_stream(42, 0, 2).next_u64());
    REQUIRE(derive_stream(1, 0).next_u64() != derive_stream(2, 0).next_u64());
}

TEST_CASE("uniform and normal draws have the right moments", "[rng]") {
    RngStream rng = derive_stream(7, 0);
    const int n = 100000;
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        mean += x;
        var += x * x;
    }
    mean /= n;
    var = var / n - mean * mean;
    REQUIRE(std::abs(mean) < 0.02);
    REQUIRE(std::abs(var - 1.0) < 0.03);

    double umean = 0.0;
    for (int i = 0; i < n; ++i) umean += rng.uniform(0.0, 1.0);
    REQUIRE(std::abs(umean / n - 0.5) < 0.01);
}

TEST_CASE("next_index is unbiased over small ranges", "[rng]") {
    RngStream rng = derive_stream(9, 0);
    int counts[5] = {0, 0, 0, 0, 0};
    const int n = 50000;
    for (int i = 0; i < n; ++i) counts[rng.next_index(5)] += 1;
    for (int c : counts) REQUIRE(std::abs(c - n / 5) < 5 * std::sqrt(n * 0.2 * 0.8));
}

TEST_CASE("matmul matches hand loops with every transpose flag", "[tensor]") {
    RngStream rng = derive_stream(3, 0);
    auto fill = [&](Tensor2<double>& t) {
        for (auto& v : t.data) v = rng.uniform(-1.0, 1.0);
    };
    Tensor2<double> a(3, 4), b(4, 5);
    fill(a);
    fill(b);
    const Tensor2<double> c = matmul(a, b);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += a(i, k) * b(k, j);
            REQUIRE_THAT(c(i, j), Catch::Matchers::WithinAbs(acc, 1e-12));
        }

    // A^T B with A [4 x 3]
    Tensor2<double> at(4, 3);
    fill(at);
    const Tensor2<double> ctn = matmul(at, b, true);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += at(k, i) * b(k, j);
            REQUIRE_THAT(ctn(i, j), Catch::Matchers::WithinAbs(acc, 1e-12));
        }

    // A B^T with B [5 x 4]
    Tensor2<double> bt(5, 4);
    fill(bt);
    const Tensor2<double> cnt = matmul(a, bt, false, true);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += a(i, k) * bt(j, k);
            REQUIRE_THAT(cnt(i, j), Catch::Matchers::WithinAbs(acc, 1e-12));
        }

    REQUIRE_THROWS_AS(matmul(a, Tensor2<double>(3, 2)), ShapeError);
}

TEST_CASE("hcat joins columns rowwise", "[tensor]") {
    Tensor2<float> a(2, 2, {1, 2, 3, 4});
    Tensor2<float> b(2, 1, {5, 6});
    const Tensor2<float> c = hcat(a, b);
    REQUIRE(c.cols == 3);
    REQUIRE(c(0, 2) == 5.0f);
    REQUIRE(c(1, 0) == 3.0f);
    REQUIRE_THROWS_AS(hcat(a, Tensor2<float>(3, 1)), ShapeError);
}

TEST_CASE("all_finite flags NaN and inf", "[tensor]") {
    Tensor2<float> t(1, 2, {1.0f, 2.0f});
    REQUIRE(all_finite(t));
    t(0, 1) = NAN;
    REQUIRE_FALSE(all_finite(t));
    t(0, 1) = INFINITY;
    REQUIRE_FALSE(all_finite(t));
}
