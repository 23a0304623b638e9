#pragma once

#include <cblas.h>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "fasttd3/error.hpp"

namespace fasttd3 {

// Dense row-major 2-D tensor. Matrix products go through BLAS; everything
// else is plain loops. Scalar is float for training and double for the
// gradient-check evaluation mode.
template <typename S>
struct Tensor2 {
    static_assert(std::is_floating_point_v<S>);

    int rows = 0;
    int cols = 0;
    std::vector<S> data;

    Tensor2() = default;
    Tensor2(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, S(0)) {}
    Tensor2(int r, int c, std::vector<S> d) : rows(r), cols(c), data(std::move(d)) {
        if (data.size() != static_cast<size_t>(r) * c)
            throw ShapeError("Tensor2: data length does not match rows*cols");
    }

    size_t size() const { return data.size(); }

    S& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    S operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    std::span<S> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<const S> row(int r) const {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }

    bool same_shape(const Tensor2& o) const { return rows == o.rows && cols == o.cols; }
};

template <typename S>
bool all_finite(const Tensor2<S>& t) {
    for (S v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

template <typename S>
bool all_finite(std::span<const S> v) {
    for (S x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

namespace detail {

inline void blas_gemm(bool ta, bool tb, int m, int n, int k, const float* a, int lda, const float* b,
                      int ldb, float* c, int ldc) {
    cblas_sgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k,
                1.0f, a, lda, b, ldb, 0.0f, c, ldc);
}

inline void blas_gemm(bool ta, bool tb, int m, int n, int k, const double* a, int lda, const double* b,
                      int ldb, double* c, int ldc) {
    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans, m, n, k,
                1.0, a, lda, b, ldb, 0.0, c, ldc);
}

}  // namespace detail

// C = op(A) * op(B), where op is optional transposition.
template <typename S>
Tensor2<S> matmul(const Tensor2<S>& a, const Tensor2<S>& b, bool trans_a = false, bool trans_b = false) {
    const int m = trans_a ? a.cols : a.rows;
    const int k = trans_a ? a.rows : a.cols;
    const int kb = trans_b ? b.cols : b.rows;
    const int n = trans_b ? b.rows : b.cols;
    if (k != kb)
        throw ShapeError("matmul: inner dimensions " + std::to_string(k) + " vs " + std::to_string(kb));
    Tensor2<S> c(m, n);
    if (m == 0 || n == 0 || k == 0) return c;
    detail::blas_gemm(trans_a, trans_b, m, n, k, a.data.data(), a.cols, b.data.data(), b.cols,
                      c.data.data(), c.cols);
    return c;
}

// Concatenate columns: [a | b], row counts must match.
template <typename S>
Tensor2<S> hcat(const Tensor2<S>& a, const Tensor2<S>& b) {
    if (a.rows != b.rows) throw ShapeError("hcat: row counts differ");
    Tensor2<S> out(a.rows, a.cols + b.cols);
    for (int r = 0; r < a.rows; ++r) {
        auto dst = out.row(r);
        auto ra = a.row(r);
        auto rb = b.row(r);
        for (int c = 0; c < a.cols; ++c) dst[c] = ra[c];
        for (int c = 0; c < b.cols; ++c) dst[a.cols + c] = rb[c];
    }
    return out;
}

template <typename S, typename T>
Tensor2<T> cast_tensor(const Tensor2<S>& t) {
    Tensor2<T> out(t.rows, t.cols);
    for (size_t i = 0; i < t.data.size(); ++i) out.data[i] = static_cast<T>(t.data[i]);
    return out;
}

}  // namespace fasttd3
