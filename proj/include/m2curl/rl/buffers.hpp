#pragma once

#include <memory>
#include <random>
#include <vector>

#include "m2curl/repr/augment.hpp"
#include "m2curl/sim/environment.hpp"

namespace m2curl::rl {

using ObsPtr = std::shared_ptr<const sim::Observation>;

/// One environment step. Observations are raw and shared between consecutive
/// transitions, so storing s' costs nothing extra. `done` masks the bootstrap
/// and is only set by a true terminal state, never by the time limit.
struct Transition {
    ObsPtr observation;
    sim::Action action{};
    double reward = 0.0;
    ObsPtr next_observation;
    bool done = false;
};

/// FIFO ring of transitions with uniform sampling (with replacement).
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw ConfigError("replay capacity must be positive");
        storage_.reserve(std::min<std::size_t>(capacity, 1 << 16));
    }

    void push(Transition t) {
        if (storage_.size() < capacity_) {
            storage_.push_back(std::move(t));
        } else {
            storage_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    std::size_t size() const { return storage_.size(); }
    std::size_t capacity() const { return capacity_; }

    /// i-th stored transition, oldest first.
    const Transition& at(std::size_t i) const { return storage_.at((head_ + i) % storage_.size()); }

    template <typename Rng>
    std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const {
        if (batch_size == 0 || storage_.size() < batch_size) {
            throw ContractError("replay buffer holds " + std::to_string(storage_.size()) +
                                " transitions, cannot sample " + std::to_string(batch_size));
        }
        std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
        std::vector<std::size_t> idx(batch_size);
        for (auto& i : idx) i = pick(rng);
        return idx;
    }

    template <typename Rng>
    std::vector<const Transition*> sample(std::size_t batch_size, Rng& rng) const {
        std::vector<const Transition*> out;
        for (std::size_t i : sample_indices(batch_size, rng)) out.push_back(&at(i));
        return out;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;
    std::vector<Transition> storage_;
};

/// One on-policy step. `action` is the unclipped Gaussian sample; `view`
/// holds the crop corners the policy acted on (query view at training time).
struct RolloutEntry {
    ObsPtr observation;
    sim::Action action{};
    double log_prob = 0.0;
    double value = 0.0;
    double reward = 0.0;
    bool done = false;
    repr::CropOffset view_visual;
    repr::CropOffset view_tactile;
};

struct RolloutBuffer {
    std::vector<RolloutEntry> entries;
    /// V(s_T) of the state after the last entry (0 if that entry ended an episode).
    double bootstrap_value = 0.0;

    std::size_t size() const { return entries.size(); }
    void clear() {
        entries.clear();
        bootstrap_value = 0.0;
    }
};

}  // namespace m2curl::rl
