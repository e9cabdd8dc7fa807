#pragma once

#include <random>
#include <vector>

#include "m2curl/numerics/tensor.hpp"
#include "m2curl/sim/environment.hpp"

namespace m2curl::repr {

struct CropOffset {
    std::size_t row = 0;
    std::size_t col = 0;
    friend bool operator==(CropOffset, CropOffset) = default;
};

/// Crop corners for one observation: query visual, query tactile, key visual, key tactile.
struct ViewOffsets {
    CropOffset query_visual, query_tactile, key_visual, key_tactile;
    friend bool operator==(const ViewOffsets&, const ViewOffsets&) = default;
};

/// Two independently cropped and normalized views of a batch of observations.
/// Every image tensor is [B, 1, crop, crop] with values in [0, 1].
template <typename T>
struct AugmentedPair {
    Tensor<T> query_visual;
    Tensor<T> query_tactile;
    Tensor<T> key_visual;
    Tensor<T> key_tactile;
    std::vector<ViewOffsets> crop_offsets;

    std::size_t batch() const { return crop_offsets.size(); }
};

using ObsBatch = std::vector<const sim::Observation*>;

/// Crops `crop` x `crop` windows at the given corners and scales intensities to [0, 1].
template <typename T>
Tensor<T> crop_normalize(const std::vector<const sim::Image*>& images, const std::vector<CropOffset>& offsets,
                         std::size_t crop) {
    const std::size_t B = images.size();
    Tensor<T> out(Shape{B, 1, crop, crop});
    T* dst = out.raw();
    for (std::size_t b = 0; b < B; ++b) {
        const sim::Image& img = *images[b];
        if (offsets[b].row + crop > img.height || offsets[b].col + crop > img.width) {
            throw DimensionError("crop window exceeds image of size " + std::to_string(img.height) + "x" +
                                 std::to_string(img.width));
        }
        for (std::size_t r = 0; r < crop; ++r) {
            const std::uint8_t* src = img.pixels.data() + (offsets[b].row + r) * img.width + offsets[b].col;
            for (std::size_t c = 0; c < crop; ++c) *dst++ = static_cast<T>(src[c]) / T(255);
        }
    }
    return out;
}

inline CropOffset center_offset(std::size_t image_size, std::size_t crop) {
    const std::size_t o = (image_size - crop) / 2;
    return {o, o};
}

/// Draws four independent uniform crop corners per observation (query and key
/// view, each modality) and materializes both views.
template <typename T, typename Rng>
AugmentedPair<T> augment_pair(const ObsBatch& batch, std::size_t crop, Rng& rng) {
    if (batch.empty()) throw ContractError("augment_pair: empty batch");
    const std::size_t H = batch.front()->visual.height;
    if (crop > H || crop > batch.front()->visual.width) {
        throw ConfigError("crop_size " + std::to_string(crop) + " exceeds image size " + std::to_string(H));
    }
    std::uniform_int_distribution<std::size_t> pick(0, H - crop);
    AugmentedPair<T> out;
    out.crop_offsets.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        ViewOffsets v;
        v.query_visual = {pick(rng), pick(rng)};
        v.query_tactile = {pick(rng), pick(rng)};
        v.key_visual = {pick(rng), pick(rng)};
        v.key_tactile = {pick(rng), pick(rng)};
        out.crop_offsets.push_back(v);
    }
    std::vector<const sim::Image*> vis, tac;
    for (auto* o : batch) {
        vis.push_back(&o->visual);
        tac.push_back(&o->tactile);
    }
    auto select = [&](auto member) {
        std::vector<CropOffset> offs;
        for (const auto& v : out.crop_offsets) offs.push_back(v.*member);
        return offs;
    };
    out.query_visual = crop_normalize<T>(vis, select(&ViewOffsets::query_visual), crop);
    out.query_tactile = crop_normalize<T>(tac, select(&ViewOffsets::query_tactile), crop);
    out.key_visual = crop_normalize<T>(vis, select(&ViewOffsets::key_visual), crop);
    out.key_tactile = crop_normalize<T>(tac, select(&ViewOffsets::key_tactile), crop);
    return out;
}

/// Deterministic center crop of both modalities, used when acting and evaluating.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> center_views(const ObsBatch& batch, std::size_t crop) {
    std::vector<const sim::Image*> vis, tac;
    for (auto* o : batch) {
        vis.push_back(&o->visual);
        tac.push_back(&o->tactile);
    }
    const std::vector<CropOffset> offs(batch.size(), center_offset(batch.front()->visual.height, crop));
    return {crop_normalize<T>(vis, offs, crop), crop_normalize<T>(tac, offs, crop)};
}

}  // namespace m2curl::repr
