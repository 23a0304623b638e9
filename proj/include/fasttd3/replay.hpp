#pragma once

#include <span>
#include <string>
#include <vector>

#include "fasttd3/error.hpp"
#include "fasttd3/rng.hpp"
#include "fasttd3/tensor.hpp"

namespace fasttd3 {

// Per-environment ring replay. Capacity is N slots per env for E envs, so the
// total is N * E and growing E never shrinks how much of one env's trajectory
// is kept. bootstrap_mask is 0 only for true terminations; truncated steps
// keep mask 1 and next_obs holds the captured final observation, never the
// post-reset one.

template <typename S>
struct Transition {
    std::vector<S> obs, privileged_obs, action;
    S reward = S(0);
    std::vector<S> next_obs, next_privileged_obs;
    S bootstrap_mask = S(1);
};

// Columnar batch; used both to insert one row per env and as the sample output.
template <typename S>
struct TransitionBatch {
    Tensor2<S> obs, privileged_obs, action;
    std::vector<S> reward;
    Tensor2<S> next_obs, next_privileged_obs;
    std::vector<S> bootstrap_mask;

    int rows() const { return obs.rows; }
};

template <typename S>
class ReplayBuffer {
  public:
    ReplayBuffer(int num_envs, int per_env_capacity, int obs_dim, int privileged_obs_dim, int action_dim)
        : num_envs_(num_envs),
          capacity_(per_env_capacity),
          obs_dim_(obs_dim),
          priv_dim_(privileged_obs_dim),
          action_dim_(action_dim) {
        if (num_envs < 1 || per_env_capacity < 1)
            throw ConfigError("ReplayBuffer: num_envs and per-env capacity must be >= 1");
        const size_t slots = static_cast<size_t>(num_envs) * per_env_capacity;
        obs_.assign(slots * obs_dim, S(0));
        priv_.assign(slots * priv_dim_, S(0));
        action_.assign(slots * action_dim, S(0));
        next_obs_.assign(slots * obs_dim, S(0));
        next_priv_.assign(slots * priv_dim_, S(0));
        reward_.assign(slots, S(0));
        mask_.assign(slots, S(1));
    }

    int num_envs() const { return num_envs_; }
    int per_env_capacity() const { return capacity_; }
    int per_env_fill() const { return fill_; }
    long long size() const { return static_cast<long long>(fill_) * num_envs_; }

    // One transition per env; each env's ring advances by one.
    void insert(const TransitionBatch<S>& batch) {
        check_batch_dims(batch, num_envs_, "insert");
        for (int e = 0; e < num_envs_; ++e) {
            const size_t slot = static_cast<size_t>(e) * capacity_ + cursor_;
            copy_row(batch.obs, e, obs_, slot * obs_dim_);
            copy_row(batch.privileged_obs, e, priv_, slot * priv_dim_);
            copy_row(batch.action, e, action_, slot * action_dim_);
            copy_row(batch.next_obs, e, next_obs_, slot * obs_dim_);
            copy_row(batch.next_privileged_obs, e, next_priv_, slot * priv_dim_);
            reward_[slot] = batch.reward[e];
            mask_[slot] = batch.bootstrap_mask[e];
        }
        cursor_ = (cursor_ + 1) % capacity_;
        if (fill_ < capacity_) ++fill_;
    }

    // Uniform with replacement over every stored transition across all envs.
    TransitionBatch<S> sample(int batch_size, RngStream& rng) const {
        if (fill_ == 0) throw StateError("ReplayBuffer::sample: buffer is empty");
        if (batch_size < 1) throw ConfigError("ReplayBuffer::sample: batch_size must be >= 1");
        TransitionBatch<S> out;
        out.obs = Tensor2<S>(batch_size, obs_dim_);
        out.privileged_obs = Tensor2<S>(batch_size, priv_dim_);
        out.action = Tensor2<S>(batch_size, action_dim_);
        out.next_obs = Tensor2<S>(batch_size, obs_dim_);
        out.next_privileged_obs = Tensor2<S>(batch_size, priv_dim_);
        out.reward.resize(batch_size);
        out.bootstrap_mask.resize(batch_size);
        const uint64_t total = static_cast<uint64_t>(fill_) * num_envs_;
        for (int i = 0; i < batch_size; ++i) {
            const uint64_t idx = rng.next_index(total);
            const size_t slot = (idx / fill_) * static_cast<size_t>(capacity_) + idx % fill_;
            read_row(obs_, slot * obs_dim_, out.obs, i);
            read_row(priv_, slot * priv_dim_, out.privileged_obs, i);
            read_row(action_, slot * action_dim_, out.action, i);
            read_row(next_obs_, slot * obs_dim_, out.next_obs, i);
            read_row(next_priv_, slot * priv_dim_, out.next_privileged_obs, i);
            out.reward[i] = reward_[slot];
            out.bootstrap_mask[i] = mask_[slot];
        }
        return out;
    }

    // age 0 = newest stored transition for that env, age fill-1 = oldest.
    Transition<S> peek(int env, int age) const {
        if (env < 0 || env >= num_envs_) throw StateError("ReplayBuffer::peek: bad env index");
        if (age < 0 || age >= fill_) throw StateError("ReplayBuffer::peek: age out of range");
        const int newest = (cursor_ - 1 + capacity_) % capacity_;
        const int ring = (newest - age + capacity_) % capacity_;
        const size_t slot = static_cast<size_t>(env) * capacity_ + ring;
        Transition<S> t;
        t.obs.assign(obs_.begin() + slot * obs_dim_, obs_.begin() + (slot + 1) * obs_dim_);
        t.privileged_obs.assign(priv_.begin() + slot * priv_dim_, priv_.begin() + (slot + 1) * priv_dim_);
        t.action.assign(action_.begin() + slot * action_dim_, action_.begin() + (slot + 1) * action_dim_);
        t.next_obs.assign(next_obs_.begin() + slot * obs_dim_, next_obs_.begin() + (slot + 1) * obs_dim_);
        t.next_privileged_obs.assign(next_priv_.begin() + slot * priv_dim_,
                                     next_priv_.begin() + (slot + 1) * priv_dim_);
        t.reward = reward_[slot];
        t.bootstrap_mask = mask_[slot];
        return t;
    }

    static void check_batch_dims(const TransitionBatch<S>& b, int rows, const char* who) {
        if (b.obs.rows != rows || b.privileged_obs.rows != rows || b.action.rows != rows ||
            b.next_obs.rows != rows || b.next_privileged_obs.rows != rows ||
            b.reward.size() != static_cast<size_t>(rows) ||
            b.bootstrap_mask.size() != static_cast<size_t>(rows))
            throw ShapeError(std::string(who) + ": batch must have one row per env");
    }

  private:
    static void copy_row(const Tensor2<S>& src, int row, std::vector<S>& dst, size_t offset) {
        auto r = src.row(row);
        for (int c = 0; c < src.cols; ++c) dst[offset + c] = r[c];
    }
    static void read_row(const std::vector<S>& src, size_t offset, Tensor2<S>& dst, int row) {
        auto r = dst.row(row);
        for (int c = 0; c < dst.cols; ++c) r[c] = src[offset + c];
    }

    int num_envs_, capacity_, obs_dim_, priv_dim_, action_dim_;
    int cursor_ = 0;  // same ring position for every env: inserts are lockstep
    int fill_ = 0;
    std::vector<S> obs_, priv_, action_, next_obs_, next_priv_, reward_, mask_;
};

}  // namespace fasttd3
