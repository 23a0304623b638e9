#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fasttd3/error.hpp"
#include "fasttd3/tensor.hpp"

namespace fasttd3 {

// Categorical value distributions over a fixed atom grid, plus the Bellman
// projection, cross-entropy loss, and clipped-double target selection.

template <typename S>
struct AtomGrid {
    S v_min = S(0);
    S v_max = S(0);
    int num_atoms = 0;
    std::vector<S> atoms;  // z_i = v_min + i * delta, strictly increasing

    AtomGrid() = default;
    AtomGrid(S vmin, S vmax, int n) : v_min(vmin), v_max(vmax), num_atoms(n) {
        if (!(vmin < vmax)) throw ConfigError("AtomGrid: v_min must be < v_max");
        if (n < 2) throw ConfigError("AtomGrid: num_atoms must be >= 2");
        atoms.resize(n);
        const double d = (static_cast<double>(vmax) - vmin) / (n - 1);
        for (int i = 0; i < n; ++i) atoms[i] = static_cast<S>(static_cast<double>(vmin) + d * i);
        atoms.back() = vmax;
    }

    S delta() const { return static_cast<S>((static_cast<double>(v_max) - v_min) / (num_atoms - 1)); }

    bool operator==(const AtomGrid& o) const {
        return v_min == o.v_min && v_max == o.v_max && num_atoms == o.num_atoms;
    }
};

// Probability mass per batch row over grid atoms. Rows are non-negative and
// sum to 1 (within 1e-5).
template <typename S>
struct CategoricalDistribution {
    AtomGrid<S> grid;
    Tensor2<S> probs;  // [batch x num_atoms]
};

namespace detail {

template <typename S>
void check_normalized(const Tensor2<S>& probs, const char* who) {
    for (int r = 0; r < probs.rows; ++r) {
        double sum = 0.0;
        for (S p : probs.row(r)) {
            if (!(p >= S(0))) throw NumericError(std::string(who) + ": negative or NaN probability");
            sum += static_cast<double>(p);
        }
        if (std::abs(sum - 1.0) > 1e-5)
            throw NumericError(std::string(who) + ": row " + std::to_string(r) +
                               " sums to " + std::to_string(sum));
    }
}

}  // namespace detail

// Distributional Bellman backup: each atom z_j maps to
// Tz_j = reward + bootstrap_mask * discount * z_j, clipped to the grid, with
// its mass split linearly between the two neighboring atoms. Accumulation is
// done in double so output rows sum to 1 within 1e-6 in either precision.
template <typename S>
Tensor2<S> project_target(const AtomGrid<S>& grid, std::span<const S> reward, S discount,
                          std::span<const S> bootstrap_mask, const Tensor2<S>& next_probs) {
    if (grid.num_atoms < 2 || grid.atoms.size() != static_cast<size_t>(grid.num_atoms))
        throw ConfigError("project_target: invalid grid");
    if (!(discount >= S(0) && discount < S(1)))
        throw ConfigError("project_target: discount must be in [0, 1)");
    if (next_probs.cols != grid.num_atoms)
        throw ShapeError("project_target: next_probs cols != num_atoms");
    if (reward.size() != static_cast<size_t>(next_probs.rows) || bootstrap_mask.size() != reward.size())
        throw ShapeError("project_target: batch size mismatch");
    detail::check_normalized(next_probs, "project_target");

    const double v_min = grid.v_min;
    const double v_max = grid.v_max;
    const int n = grid.num_atoms;
    const double dz = (v_max - v_min) / (n - 1);

    Tensor2<S> out(next_probs.rows, n);
    std::vector<double> m(n);
    for (int r = 0; r < next_probs.rows; ++r) {
        std::fill(m.begin(), m.end(), 0.0);
        const double rew = reward[r];
        const double scale = static_cast<double>(bootstrap_mask[r]) * discount;
        if (scale == 0.0) {
            // terminal row: all mass lands on the (clipped) reward, bit-exactly
            // independent of next_probs
            const double tz = std::min(std::max(rew, v_min), v_max);
            const double b = (tz - v_min) / dz;
            const int lo = static_cast<int>(std::floor(b));
            const int hi = static_cast<int>(std::ceil(b));
            if (lo == hi) {
                m[lo] = 1.0;
            } else {
                m[lo] = hi - b;
                m[hi] = b - lo;
            }
        } else {
            auto src = next_probs.row(r);
            for (int j = 0; j < n; ++j) {
                const double p = src[j];
                if (p == 0.0) continue;
                double tz = rew + scale * static_cast<double>(grid.atoms[j]);
                tz = std::min(std::max(tz, v_min), v_max);
                const double b = (tz - v_min) / dz;
                const int lo = static_cast<int>(std::floor(b));
                const int hi = static_cast<int>(std::ceil(b));
                if (lo == hi) {
                    m[lo] += p;
                } else {
                    m[lo] += p * (hi - b);
                    m[hi] += p * (b - lo);
                }
            }
        }
        auto dst = out.row(r);
        for (int j = 0; j < n; ++j) dst[j] = static_cast<S>(m[j]);
    }
    return out;
}

// E[Z] per batch row.
template <typename S>
std::vector<S> expected_value(const CategoricalDistribution<S>& dist) {
    if (dist.probs.cols != dist.grid.num_atoms)
        throw ShapeError("expected_value: probs cols != num_atoms");
    std::vector<S> out(dist.probs.rows);
    for (int r = 0; r < dist.probs.rows; ++r) {
        double acc = 0.0;
        auto row = dist.probs.row(r);
        for (int j = 0; j < dist.grid.num_atoms; ++j)
            acc += static_cast<double>(row[j]) * static_cast<double>(dist.grid.atoms[j]);
        out[r] = static_cast<S>(acc);
    }
    return out;
}

// Mean cross-entropy between target rows and softmax(pred_logits), with the
// loss gradient wrt the logits: (softmax(pred) - target) / batch.
template <typename S>
std::pair<S, Tensor2<S>> cross_entropy_loss(const Tensor2<S>& pred_logits, const Tensor2<S>& target_probs) {
    if (!pred_logits.same_shape(target_probs))
        throw ShapeError("cross_entropy_loss: shape mismatch");
    detail::check_normalized(target_probs, "cross_entropy_loss");

    const int batch = pred_logits.rows;
    const int n = pred_logits.cols;
    Tensor2<S> grad(batch, n);
    double loss = 0.0;
    const S inv_batch = S(1) / static_cast<S>(batch);
    for (int r = 0; r < batch; ++r) {
        auto logits = pred_logits.row(r);
        auto target = target_probs.row(r);
        auto g = grad.row(r);
        S max_logit = logits[0];
        for (int j = 1; j < n; ++j) max_logit = std::max(max_logit, logits[j]);
        double z = 0.0;
        for (int j = 0; j < n; ++j) z += std::exp(static_cast<double>(logits[j] - max_logit));
        const double log_z = std::log(z);
        for (int j = 0; j < n; ++j) {
            const double logp = static_cast<double>(logits[j] - max_logit) - log_z;
            loss -= static_cast<double>(target[j]) * logp;
            g[j] = (static_cast<S>(std::exp(logp)) - target[j]) * inv_batch;
        }
    }
    return {static_cast<S>(loss / batch), std::move(grad)};
}

enum class CdqMode { min, avg };

// min: per row, keep the whole input distribution with the smaller expected
// value (ties go to dist1). avg: element-wise mean of the probabilities.
template <typename S>
CategoricalDistribution<S> clipped_double_target(const CategoricalDistribution<S>& dist1,
                                                 const CategoricalDistribution<S>& dist2, CdqMode mode) {
    if (!(dist1.grid == dist2.grid)) throw ConfigError("clipped_double_target: grids differ");
    if (!dist1.probs.same_shape(dist2.probs))
        throw ShapeError("clipped_double_target: batch shapes differ");

    CategoricalDistribution<S> out{dist1.grid, Tensor2<S>(dist1.probs.rows, dist1.probs.cols)};
    if (mode == CdqMode::avg) {
        for (size_t i = 0; i < out.probs.data.size(); ++i)
            out.probs.data[i] = (dist1.probs.data[i] + dist2.probs.data[i]) / S(2);
        return out;
    }
    const std::vector<S> e1 = expected_value(dist1);
    const std::vector<S> e2 = expected_value(dist2);
    for (int r = 0; r < out.probs.rows; ++r) {
        const auto& src = (e2[r] < e1[r]) ? dist2.probs : dist1.probs;
        auto dst = out.probs.row(r);
        auto s = src.row(r);
        for (int j = 0; j < out.probs.cols; ++j) dst[j] = s[j];
    }
    return out;
}

// softmax rows (used to turn critic logits into distributions)
template <typename S>
Tensor2<S> softmax_rows(const Tensor2<S>& logits) {
    Tensor2<S> out(logits.rows, logits.cols);
    for (int r = 0; r < logits.rows; ++r) {
        auto in = logits.row(r);
        auto o = out.row(r);
        S max_logit = in[0];
        for (int j = 1; j < logits.cols; ++j) max_logit = std::max(max_logit, in[j]);
        double z = 0.0;
        for (int j = 0; j < logits.cols; ++j) z += std::exp(static_cast<double>(in[j] - max_logit));
        for (int j = 0; j < logits.cols; ++j)
            o[j] = static_cast<S>(std::exp(static_cast<double>(in[j] - max_logit)) / z);
    }
    return out;
}

}  // namespace fasttd3
