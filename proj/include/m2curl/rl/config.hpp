#pragma once

#include <string>

#include "m2curl/errors.hpp"

namespace m2curl::rl {

struct SACConfig {
    double gamma = 0.99;
    double alpha_ent = 0.1;
    double polyak = 0.995;
    std::size_t batch_size = 128;
    std::size_t critic_encoder_sync_period = 2;
    std::size_t replay_capacity = 100000;
    /// Uniform-random actions before the first update.
    std::size_t init_steps = 1000;
    /// One gradient update every `update_every` env steps.
    std::size_t update_every = 1;
    std::size_t hidden = 256;
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    double log_std_min = -5.0;
    double log_std_max = 2.0;

    void validate() const {
        auto fail = [](const std::string& f, const std::string& why) { throw ConfigError("sac." + f + ": " + why); };
        if (!(gamma >= 0 && gamma < 1)) fail("gamma", "must lie in [0, 1)");
        if (!(alpha_ent >= 0)) fail("alpha_ent", "must be >= 0");
        if (!(polyak > 0 && polyak <= 1)) fail("polyak", "must lie in (0, 1]");
        if (batch_size < 2) fail("batch_size", "must be >= 2");
        if (critic_encoder_sync_period == 0) fail("critic_encoder_sync_period", "must be positive");
        if (replay_capacity < batch_size) fail("replay_capacity", "must be >= batch_size");
        if (update_every == 0) fail("update_every", "must be positive");
        if (hidden == 0) fail("hidden", "must be positive");
        if (!(actor_lr > 0)) fail("actor_lr", "must be > 0");
        if (!(critic_lr > 0)) fail("critic_lr", "must be > 0");
        if (!(log_std_min < log_std_max)) fail("log_std_min", "must be below log_std_max");
    }
};

struct PPOConfig {
    double clip_epsilon = 0.2;
    double gae_lambda = 0.95;
    double gamma = 0.99;
    std::size_t epochs_per_update = 4;
    std::size_t rollout_horizon = 2048;
    std::size_t minibatch_size = 64;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    std::size_t hidden = 64;
    double learning_rate = 3e-4;
    double init_log_std = -0.5;

    void validate() const {
        auto fail = [](const std::string& f, const std::string& why) { throw ConfigError("ppo." + f + ": " + why); };
        if (!(clip_epsilon > 0)) fail("clip_epsilon", "must be > 0");
        if (!(gae_lambda >= 0 && gae_lambda <= 1)) fail("gae_lambda", "must lie in [0, 1]");
        if (!(gamma >= 0 && gamma <= 1)) fail("gamma", "must lie in [0, 1]");
        if (rollout_horizon == 0) fail("rollout_horizon", "must be positive");
        if (minibatch_size < 2 || minibatch_size > rollout_horizon) {
            fail("minibatch_size", "must lie in [2, rollout_horizon]");
        }
        if (!(value_coef >= 0)) fail("value_coef", "must be >= 0");
        if (!(entropy_coef >= 0)) fail("entropy_coef", "must be >= 0");
        if (hidden == 0) fail("hidden", "must be positive");
        if (!(learning_rate > 0)) fail("learning_rate", "must be > 0");
    }
};

}  // namespace m2curl::rl
