#pragma once

#include <cmath>
#include <limits>

#include "m2curl/repr/augment.hpp"
#include "m2curl/repr/model.hpp"

namespace m2curl::repr {

/// B x d matrix whose rows are unit vectors.
template <typename T>
struct CodeBatch {
    Tensor<T> codes;

    /// L2-normalizes each row of `rows`.
    static CodeBatch normalized(const Tensor<T>& rows) {
        Tape<T> tape;
        return {tape.value(ops::l2_normalize_rows(tape, tape.constant(rows)))};
    }

    std::size_t batch() const { return codes.dim(0); }
    std::size_t dim() const { return codes.dim(1); }
};

/// InfoNCE value for code batches (no gradient).
template <typename T>
T info_nce(const CodeBatch<T>& queries, const CodeBatch<T>& keys, T tau) {
    Tape<T> tape;
    return tape.value(ops::info_nce(tape, tape.constant(queries.codes), tape.constant(keys.codes), tau)).item();
}

/// Embeddings of an augmented pair: queries from the online encoders (trainable),
/// keys from the momentum encoders (constants on the tape).
struct PairEmbeddings {
    Var query_visual;
    Var query_tactile;
    Var key_visual;
    Var key_tactile;
};

template <typename T>
PairEmbeddings embed_pair(Tape<T>& tape, RepresentationModel<T>& model, const AugmentedPair<T>& aug) {
    PairEmbeddings e;
    e.query_visual = model.online_visual(tape, tape.constant(aug.query_visual), Binding::trainable);
    e.query_tactile = model.online_tactile(tape, tape.constant(aug.query_tactile), Binding::trainable);
    e.key_visual = model.momentum_visual(tape, tape.constant(aug.key_visual), Binding::detached);
    e.key_tactile = model.momentum_tactile(tape, tape.constant(aug.key_tactile), Binding::detached);
    return e;
}

/// L_VV or L_TT: same-modality head on both views. The key path reuses the
/// online head under gradient detachment, or the heads of `key_heads` when
/// given (a frozen snapshot, used to finite-difference the query path alone).
template <typename T>
Var intra_loss(Tape<T>& tape, RepresentationModel<T>& model, const PairEmbeddings& emb, Modality modality, T tau,
               RepresentationModel<T>* key_heads = nullptr) {
    const bool vis = modality == Modality::visual;
    RepresentationModel<T>& km = key_heads ? *key_heads : model;
    Head<T>& head = vis ? model.head_vv : model.head_tt;
    Head<T>& key_head = vis ? km.head_vv : km.head_tt;
    Var q = head(tape, vis ? emb.query_visual : emb.query_tactile, Binding::trainable);
    Var k = key_head(tape, vis ? emb.key_visual : emb.key_tactile, Binding::detached);
    return ops::info_nce(tape, q, k, tau);
}

/// L_VT: H_vt(query visual) against H_tv(key tactile); L_TV is the mirror image.
template <typename T>
Var inter_loss(Tape<T>& tape, RepresentationModel<T>& model, const PairEmbeddings& emb, Direction direction, T tau,
               RepresentationModel<T>* key_heads = nullptr) {
    const bool vt = direction == Direction::vt;
    RepresentationModel<T>& km = key_heads ? *key_heads : model;
    Var q = vt ? model.head_vt(tape, emb.query_visual, Binding::trainable)
               : model.head_tv(tape, emb.query_tactile, Binding::trainable);
    Var k = vt ? km.head_tv(tape, emb.key_tactile, Binding::detached)
               : km.head_vt(tape, emb.key_visual, Binding::detached);
    return ops::info_nce(tape, q, k, tau);
}

template <typename T>
Var intra_loss(Tape<T>& tape, RepresentationModel<T>& model, const AugmentedPair<T>& aug, Modality modality, T tau) {
    return intra_loss(tape, model, embed_pair(tape, model, aug), modality, tau);
}

template <typename T>
Var inter_loss(Tape<T>& tape, RepresentationModel<T>& model, const AugmentedPair<T>& aug, Direction direction,
               T tau) {
    return inter_loss(tape, model, embed_pair(tape, model, aug), direction, tau);
}

/// Per-component values for logging under loss_vv / loss_tt / loss_vt / loss_tv / loss_mm.
struct LossComponents {
    double loss_vv = 0.0;
    double loss_tt = 0.0;
    double loss_vt = 0.0;
    double loss_tv = 0.0;
    double loss_mm = 0.0;
};

struct CombinedLoss {
    Var total;
    LossComponents components;
};

/// L_MM = lambda_vv L_VV + lambda_tt L_TT + lambda_vt L_VT + lambda_tv L_TV.
template <typename T>
CombinedLoss combined_loss(Tape<T>& tape, RepresentationModel<T>& model, const PairEmbeddings& emb,
                           const ContrastiveConfig& cfg, RepresentationModel<T>* key_heads = nullptr) {
    const T tau = static_cast<T>(cfg.tau);
    const Var vv = intra_loss(tape, model, emb, Modality::visual, tau, key_heads);
    const Var tt = intra_loss(tape, model, emb, Modality::tactile, tau, key_heads);
    const Var vt = inter_loss(tape, model, emb, Direction::vt, tau, key_heads);
    const Var tv = inter_loss(tape, model, emb, Direction::tv, tau, key_heads);
    Var total = ops::scale(tape, vv, static_cast<T>(cfg.lambda_vv));
    total = ops::add(tape, total, ops::scale(tape, tt, static_cast<T>(cfg.lambda_tt)));
    total = ops::add(tape, total, ops::scale(tape, vt, static_cast<T>(cfg.lambda_vt)));
    total = ops::add(tape, total, ops::scale(tape, tv, static_cast<T>(cfg.lambda_tv)));
    CombinedLoss out;
    out.total = total;
    out.components.loss_vv = static_cast<double>(tape.value(vv).item());
    out.components.loss_tt = static_cast<double>(tape.value(tt).item());
    out.components.loss_vt = static_cast<double>(tape.value(vt).item());
    out.components.loss_tv = static_cast<double>(tape.value(tv).item());
    out.components.loss_mm = static_cast<double>(tape.value(total).item());
    return out;
}

template <typename T>
CombinedLoss combined_loss(Tape<T>& tape, RepresentationModel<T>& model, const AugmentedPair<T>& aug,
                           const ContrastiveConfig& cfg, RepresentationModel<T>* key_heads = nullptr) {
    return combined_loss(tape, model, embed_pair(tape, model, aug), cfg, key_heads);
}

/// Fraction of rows whose H_vt(online visual) code is closest (cosine) to the
/// H_tv(momentum tactile) code of the same sample. Inputs are [B,1,S,S] views.
template <typename T>
double cross_modal_top1(RepresentationModel<T>& model, const Tensor<T>& visual, const Tensor<T>& tactile) {
    Tape<T> tape;
    Var q = model.head_vt(tape, model.online_visual(tape, tape.constant(visual), Binding::detached), Binding::detached);
    Var k = model.head_tv(tape, model.momentum_tactile(tape, tape.constant(tactile), Binding::detached),
                          Binding::detached);
    const Tensor<T>& qv = tape.value(q);
    const Tensor<T>& kv = tape.value(k);
    const std::size_t B = qv.dim(0), d = qv.dim(1);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < B; ++i) {
        std::size_t best = 0;
        T best_s = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < B; ++j) {
            T s = T(0);
            for (std::size_t c = 0; c < d; ++c) s += qv.at(i, c) * kv.at(j, c);
            if (s > best_s) {
                best_s = s;
                best = j;
            }
        }
        hits += best == i;
    }
    return static_cast<double>(hits) / static_cast<double>(B);
}

}  // namespace m2curl::repr
