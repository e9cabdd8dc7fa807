#pragma once

#include <algorithm>
#include <string>

#include "m2curl/numerics/layers.hpp"
#include "m2curl/repr/config.hpp"

namespace m2curl::repr {

/// Conv stack -> flatten -> affine. Input [B, 1, S, S], output [B, embed_dim].
template <typename T>
struct Encoder {
    Conv2d<T> conv1;
    Conv2d<T> conv2;
    Linear<T> fc;
    std::size_t input_size = 0;

    static std::size_t conv_out(std::size_t s) { return (s - 3) / 2 + 1; }

    Encoder() = default;

    template <typename Rng>
    Encoder(const std::string& name, std::size_t input, std::size_t embed_dim, Rng& rng)
        : conv1(name + ".conv1", 1, 8, 3, 2, rng),
          conv2(name + ".conv2", 8, 16, 3, 2, rng),
          fc(name + ".fc", 16 * conv_out(conv_out(input)) * conv_out(conv_out(input)), embed_dim, rng),
          input_size(input) {}

    Var operator()(Tape<T>& tape, Var images, Binding binding) {
        const Shape& s = tape.shape(images);
        if (s.size() != 4 || s[1] != 1 || s[2] != input_size || s[3] != input_size) {
            throw DimensionError("encoder expects [B,1," + std::to_string(input_size) + "," +
                                 std::to_string(input_size) + "], got " + shape_str(s));
        }
        Var h = ops::relu(tape, conv1(tape, images, binding));
        h = ops::relu(tape, conv2(tape, h, binding));
        return fc(tape, ops::flatten(tape, h), binding);
    }

    void collect(ParamRefs<T>& out) {
        conv1.collect(out);
        conv2.collect(out);
        fc.collect(out);
    }
    void collect(ConstParamRefs<T>& out) const {
        conv1.collect(out);
        conv2.collect(out);
        fc.collect(out);
    }
};

/// Two-layer projection head; rows of the output are L2-normalized codes.
template <typename T>
struct Head {
    Linear<T> hidden;
    Linear<T> out;

    Head() = default;

    template <typename Rng>
    Head(const std::string& name, std::size_t embed_dim, std::size_t hidden_dim, Rng& rng)
        : hidden(name + ".hidden", embed_dim, hidden_dim, rng), out(name + ".out", hidden_dim, embed_dim, rng) {}

    Var operator()(Tape<T>& tape, Var z, Binding binding) {
        return ops::l2_normalize_rows(tape, out(tape, ops::relu(tape, hidden(tape, z, binding)), binding));
    }

    void collect(ParamRefs<T>& o) {
        hidden.collect(o);
        out.collect(o);
    }
    void collect(ConstParamRefs<T>& o) const {
        hidden.collect(o);
        out.collect(o);
    }
};

/// Online and momentum encoders for both modalities plus the four heads.
template <typename T>
struct RepresentationModel {
    Encoder<T> online_visual;
    Encoder<T> online_tactile;
    Encoder<T> momentum_visual;
    Encoder<T> momentum_tactile;
    Head<T> head_vv;
    Head<T> head_vt;
    Head<T> head_tt;
    Head<T> head_tv;

    RepresentationModel() = default;

    template <typename Rng>
    RepresentationModel(const ContrastiveConfig& cfg, Rng& rng)
        : online_visual("enc_v", cfg.crop_size, cfg.embed_dim, rng),
          online_tactile("enc_t", cfg.crop_size, cfg.embed_dim, rng),
          head_vv("head_vv", cfg.embed_dim, cfg.head_hidden, rng),
          head_vt("head_vt", cfg.embed_dim, cfg.head_hidden, rng),
          head_tt("head_tt", cfg.embed_dim, cfg.head_hidden, rng),
          head_tv("head_tv", cfg.embed_dim, cfg.head_hidden, rng) {
        momentum_visual = online_visual;
        momentum_tactile = online_tactile;
        rename(momentum_visual, "mom_v");
        rename(momentum_tactile, "mom_t");
    }

    Encoder<T>& online(Modality m) { return m == Modality::visual ? online_visual : online_tactile; }
    Encoder<T>& momentum(Modality m) { return m == Modality::visual ? momentum_visual : momentum_tactile; }

    /// Online encoders and heads: everything a contrastive step trains.
    ParamRefs<T> trainable_params() {
        ParamRefs<T> out;
        online_visual.collect(out);
        online_tactile.collect(out);
        for (auto* h : {&head_vv, &head_vt, &head_tt, &head_tv}) h->collect(out);
        return out;
    }

    ParamRefs<T> online_encoder_params() {
        ParamRefs<T> out;
        online_visual.collect(out);
        online_tactile.collect(out);
        return out;
    }

    ParamRefs<T> momentum_params() {
        ParamRefs<T> out;
        momentum_visual.collect(out);
        momentum_tactile.collect(out);
        return out;
    }

    ParamRefs<T> head_params() {
        ParamRefs<T> out;
        for (auto* h : {&head_vv, &head_vt, &head_tt, &head_tv}) h->collect(out);
        return out;
    }

    ParamRefs<T> all_params() {
        ParamRefs<T> out = trainable_params();
        for (auto* p : momentum_params()) out.push_back(p);
        return out;
    }

private:
    static void rename(Encoder<T>& enc, const std::string& prefix) {
        ParamRefs<T> ps;
        enc.collect(ps);
        for (auto* p : ps) p->name = prefix + p->name.substr(p->name.find('.'));
    }
};

/// theta_m <- alpha * theta_m + (1 - alpha) * theta for each modality.
template <typename T>
void momentum_update(RepresentationModel<T>& model, double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha_ema must lie in [0, 1]");
    const ParamRefs<T> online = model.online_encoder_params();
    const ParamRefs<T> mom = model.momentum_params();
    if (online.size() != mom.size()) throw ContractError("momentum_update: encoder structures differ");
    const T a = static_cast<T>(alpha), b = static_cast<T>(1.0 - alpha);
    for (std::size_t i = 0; i < online.size(); ++i) {
        if (online[i]->value.shape() != mom[i]->value.shape()) {
            throw ContractError("momentum_update: shape mismatch for " + mom[i]->name);
        }
        if (alpha == 0.0) {
            mom[i]->value = online[i]->value;
            continue;
        }
        if (alpha == 1.0) continue;
        T* m = mom[i]->value.raw();
        const T* o = online[i]->value.raw();
        // Clamp away rounding so the result never leaves [old, online].
        for (std::size_t k = 0; k < mom[i]->value.size(); ++k) {
            const T lo = std::min(m[k], o[k]), hi = std::max(m[k], o[k]);
            m[k] = std::clamp(a * m[k] + b * o[k], lo, hi);
        }
    }
}

}  // namespace m2curl::repr
