#pragma once

#include <vector>

#include "m2curl/repr/augment.hpp"
#include "m2curl/repr/model.hpp"
#include "m2curl/rl/mode.hpp"

namespace m2curl::rl {

/// Network inputs for a batch: pixel views ([B,1,c,c]) or the state matrix ([B, state_dim]).
template <typename T>
struct Inputs {
    Tensor<T> visual;
    Tensor<T> tactile;
    Tensor<T> state;
    std::size_t batch = 0;
};

template <typename T>
Inputs<T> state_inputs(const repr::ObsBatch& batch) {
    Inputs<T> in;
    in.batch = batch.size();
    const std::size_t d = batch.front()->state.size();
    in.state = Tensor<T>(Shape{batch.size(), d});
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (batch[i]->state.size() != d) throw DimensionError("state vectors differ in length within a batch");
        for (std::size_t j = 0; j < d; ++j) in.state.at(i, j) = static_cast<T>(batch[i]->state[j]);
    }
    return in;
}

/// Crops both modalities at the given corners.
template <typename T>
Inputs<T> pixel_inputs(const repr::ObsBatch& batch, std::size_t crop, const std::vector<repr::CropOffset>& visual,
                       const std::vector<repr::CropOffset>& tactile) {
    std::vector<const sim::Image*> vis, tac;
    for (auto* o : batch) {
        vis.push_back(&o->visual);
        tac.push_back(&o->tactile);
    }
    Inputs<T> in;
    in.batch = batch.size();
    in.visual = repr::crop_normalize<T>(vis, visual, crop);
    in.tactile = repr::crop_normalize<T>(tac, tactile, crop);
    return in;
}

template <typename T>
Inputs<T> center_inputs(const repr::ObsBatch& batch, const AgentMode& mode, std::size_t crop) {
    if (!mode.pixels()) return state_inputs<T>(batch);
    const std::vector<repr::CropOffset> c(batch.size(), repr::center_offset(batch.front()->visual.height, crop));
    return pixel_inputs<T>(batch, crop, c, c);
}

/// Query view of an augmented pair as network inputs.
template <typename T>
Inputs<T> query_inputs(const repr::AugmentedPair<T>& aug) {
    Inputs<T> in;
    in.batch = aug.batch();
    in.visual = aug.query_visual;
    in.tactile = aug.query_tactile;
    return in;
}

template <typename T>
struct EncoderSet {
    repr::Encoder<T>* visual = nullptr;
    repr::Encoder<T>* tactile = nullptr;
};

/// Policy/critic input: the state vector, or the concatenation [z_v | z_t] of
/// the embeddings of the modalities in use.
template <typename T>
struct Features {
    Var features;
    Var z_visual;   // unset unless the visual encoder ran
    Var z_tactile;
};

template <typename T>
Features<T> encode_features(Tape<T>& tape, const AgentMode& mode, EncoderSet<T> enc, const Inputs<T>& in,
                            Binding binding) {
    Features<T> f;
    if (!mode.pixels()) {
        f.features = tape.constant(in.state);
        return f;
    }
    std::vector<Var> parts;
    if (mode.uses_visual()) {
        f.z_visual = (*enc.visual)(tape, tape.constant(in.visual), binding);
        parts.push_back(f.z_visual);
    }
    if (mode.uses_tactile()) {
        f.z_tactile = (*enc.tactile)(tape, tape.constant(in.tactile), binding);
        parts.push_back(f.z_tactile);
    }
    f.features = parts.size() == 1 ? parts.front() : ops::concat_cols(tape, parts);
    return f;
}

inline std::size_t feature_dim(const AgentMode& mode, std::size_t embed_dim, std::size_t state_dim) {
    if (!mode.pixels()) return state_dim;
    return (mode.uses_visual() ? embed_dim : 0) + (mode.uses_tactile() ? embed_dim : 0);
}

/// Online encoder parameters of the modalities in use.
template <typename T>
ParamRefs<T> encoder_params(const AgentMode& mode, EncoderSet<T> enc) {
    ParamRefs<T> out;
    if (mode.uses_visual()) enc.visual->collect(out);
    if (mode.uses_tactile()) enc.tactile->collect(out);
    return out;
}

}  // namespace m2curl::rl
