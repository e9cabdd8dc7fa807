#pragma once

#include <string>

#include "m2curl/errors.hpp"

namespace m2curl::repr {

/// Weights and sizes of the multimodal contrastive objective.
///
/// beta and tau differ between the two RL algorithms: 0.1 / 0.1 for SAC,
/// 1 / 0.05 for PPO. Use for_sac() / for_ppo() to get those defaults.
struct ContrastiveConfig {
    double lambda_vv = 1.0;
    double lambda_tt = 1.0;
    double lambda_vt = 1.0;
    double lambda_tv = 1.0;
    double beta = 0.1;
    double tau = 0.1;
    double alpha_ema = 0.99;
    std::size_t embed_dim = 50;
    std::size_t head_hidden = 128;
    std::size_t crop_size = 56;

    static ContrastiveConfig for_sac() { return {}; }

    static ContrastiveConfig for_ppo() {
        ContrastiveConfig c;
        c.beta = 1.0;
        c.tau = 0.05;
        return c;
    }

    void validate(std::size_t image_size) const {
        auto fail = [](const std::string& field, const std::string& why) {
            throw ConfigError("contrastive." + field + ": " + why);
        };
        if (lambda_vv < 0) fail("lambda_vv", "must be >= 0");
        if (lambda_tt < 0) fail("lambda_tt", "must be >= 0");
        if (lambda_vt < 0) fail("lambda_vt", "must be >= 0");
        if (lambda_tv < 0) fail("lambda_tv", "must be >= 0");
        if (beta < 0) fail("beta", "must be >= 0");
        if (!(tau > 0)) fail("tau", "must be > 0");
        if (!(alpha_ema >= 0 && alpha_ema <= 1)) fail("alpha_ema", "must lie in [0, 1]");
        if (embed_dim == 0) fail("embed_dim", "must be positive");
        if (head_hidden == 0) fail("head_hidden", "must be positive");
        if (crop_size == 0 || crop_size > image_size) {
            fail("crop_size", "must be in 1.." + std::to_string(image_size) + " (image size)");
        }
        // Two stride-2 3x3 convolutions need at least 7 input pixels.
        if (crop_size < 7) fail("crop_size", "must be >= 7 for the conv encoder");
    }
};

enum class Modality { visual, tactile };
enum class Direction { vt, tv };

}  // namespace m2curl::repr
