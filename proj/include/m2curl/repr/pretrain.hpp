#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "m2curl/numerics/adam.hpp"
#include "m2curl/repr/losses.hpp"
#include "m2curl/sim/latent_pairs.hpp"

namespace m2curl::repr {

/// Representation-only training on paired observations (no RL in the loop).
struct AlignmentConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
};

inline std::vector<sim::Observation> observations_of(const sim::LatentPairDataset& ds) {
    std::vector<sim::Observation> out(ds.visual.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].visual = ds.visual[i];
        out[i].tactile = ds.tactile[i];
    }
    return out;
}

/// Runs `cfg.steps` Adam steps on L_MM followed by a momentum update each.
/// Batches are drawn without replacement within an epoch so no batch holds a
/// duplicated positive. Returns the per-step loss components.
template <typename T, typename Rng>
std::vector<LossComponents> train_alignment(RepresentationModel<T>& model, const std::vector<sim::Observation>& data,
                                            const ContrastiveConfig& ccfg, const AlignmentConfig& cfg, Rng& rng) {
    if (data.size() < cfg.batch_size || cfg.batch_size < 2) {
        throw ConfigError("train_alignment: need batch_size >= 2 and at least batch_size observations");
    }
    AdamConfig acfg;
    acfg.learning_rate = cfg.learning_rate;
    Adam<T> opt(model.trainable_params(), acfg);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::size_t cursor = data.size();
    std::vector<LossComponents> history;
    history.reserve(cfg.steps);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        if (cursor + cfg.batch_size > order.size()) {
            std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        ObsBatch batch;
        for (std::size_t i = 0; i < cfg.batch_size; ++i) batch.push_back(&data[order[cursor + i]]);
        cursor += cfg.batch_size;

        const AugmentedPair<T> aug = augment_pair<T>(batch, ccfg.crop_size, rng);
        opt.zero_grad();
        Tape<T> tape;
        const CombinedLoss loss = combined_loss(tape, model, aug, ccfg);
        tape.backward(loss.total);
        opt.step();
        momentum_update(model, ccfg.alpha_ema);
        history.push_back(loss.components);
    }
    return history;
}

/// Mean top-1 cross-modal retrieval over consecutive center-cropped batches of
/// `batch_size` (a trailing partial batch is dropped).
template <typename T>
double retrieval_accuracy(RepresentationModel<T>& model, const std::vector<sim::Observation>& data, std::size_t crop,
                          std::size_t batch_size) {
    if (batch_size < 2 || data.size() < batch_size) throw ConfigError("retrieval_accuracy: not enough data");
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start + batch_size <= data.size(); start += batch_size) {
        ObsBatch batch;
        for (std::size_t i = 0; i < batch_size; ++i) batch.push_back(&data[start + i]);
        const auto [vis, tac] = center_views<T>(batch, crop);
        total += cross_modal_top1(model, vis, tac);
        ++batches;
    }
    return total / static_cast<double>(batches);
}

}  // namespace m2curl::repr
