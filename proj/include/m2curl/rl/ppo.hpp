#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "m2curl/numerics/adam.hpp"
#include "m2curl/repr/losses.hpp"
#include "m2curl/rl/buffers.hpp"
#include "m2curl/rl/config.hpp"
#include "m2curl/rl/features.hpp"
#include "m2curl/rl/policy.hpp"
#include "m2curl/rl/sac.hpp"

namespace m2curl::rl {

struct Advantages {
    std::vector<double> raw;         // GAE(lambda) before normalization
    std::vector<double> normalized;  // zero mean, unit variance
    std::vector<double> returns;     // raw + V
};

/// delta_t = r_t + gamma (1 - done_t) V(s_{t+1}) - V(s_t);
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}. V(s_T) = `bootstrap`.
inline Advantages gae_advantages(const std::vector<double>& rewards, const std::vector<double>& values,
                                 const std::vector<bool>& dones, double bootstrap, double gamma, double lambda) {
    const std::size_t n = rewards.size();
    if (n == 0) throw ContractError("gae_advantages: empty rollout");
    if (values.size() != n || dones.size() != n) throw ContractError("gae_advantages: length mismatch");
    Advantages out;
    out.raw.assign(n, 0.0);
    double next_adv = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double mask = dones[t] ? 0.0 : 1.0;
        const double next_value = t + 1 < n ? values[t + 1] : bootstrap;
        const double delta = rewards[t] + gamma * mask * next_value - values[t];
        next_adv = delta + gamma * lambda * mask * next_adv;
        out.raw[t] = next_adv;
    }
    out.returns.resize(n);
    for (std::size_t t = 0; t < n; ++t) out.returns[t] = out.raw[t] + values[t];
    const double mean = std::accumulate(out.raw.begin(), out.raw.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : out.raw) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    out.normalized.resize(n);
    for (std::size_t t = 0; t < n; ++t) out.normalized[t] = (out.raw[t] - mean) / (sd + 1e-8);
    return out;
}

inline Advantages gae_advantages(const RolloutBuffer& rollout, const PPOConfig& cfg) {
    std::vector<double> r, v;
    std::vector<bool> d;
    for (const auto& e : rollout.entries) {
        r.push_back(e.reward);
        v.push_back(e.value);
        d.push_back(e.done);
    }
    return gae_advantages(r, v, d, rollout.bootstrap_value, cfg.gamma, cfg.gae_lambda);
}

struct ClipLoss {
    Var surrogate;  // -mean(min(r A, clip(r, 1 - eps, 1 + eps) A))
    double ratio_mean = 0.0;
};

/// Clipped surrogate. `new_log_prob` is [B, 1]; old log-probs and advantages are data.
template <typename T>
ClipLoss ppo_clip_loss(Tape<T>& tape, Var new_log_prob, const Tensor<T>& old_log_prob, const Tensor<T>& advantages,
                       double clip_epsilon) {
    Var ratio = ops::exp(tape, ops::sub(tape, new_log_prob, tape.constant(old_log_prob)));
    Var adv = tape.constant(advantages);
    Var unclipped = ops::mul(tape, ratio, adv);
    Var clipped = ops::mul(tape,
                           ops::clamp(tape, ratio, static_cast<T>(1.0 - clip_epsilon), static_cast<T>(1.0 + clip_epsilon)),
                           adv);
    ClipLoss out;
    out.surrogate = ops::scale(tape, ops::mean(tape, ops::minimum(tape, unclipped, clipped)), T(-1));
    double s = 0.0;
    for (T v : tape.value(ratio).data()) s += static_cast<double>(v);
    out.ratio_mean = s / static_cast<double>(tape.value(ratio).size());
    return out;
}

/// PPO with a shared online encoder feeding a Gaussian policy and a value head.
/// In augmented modes the policy acts on a random crop whose corners are stored
/// in the rollout and reused as the query view when training.
template <typename T>
class PpoAgent {
public:
    AgentMode mode;
    PPOConfig cfg;
    repr::ContrastiveConfig contrastive;
    repr::RepresentationModel<T> model;
    GaussianActor<T> actor;
    Mlp<T> value_net;

    struct Decision {
        sim::Action env_action{};  // clipped to [-1, 1]
        sim::Action raw{};         // the Gaussian sample
        double log_prob = 0.0;
        double value = 0.0;
        repr::CropOffset view_visual;
        repr::CropOffset view_tactile;
    };

    struct UpdateStats {
        MetricMap metrics;
        std::vector<double> epoch_ratio_mean;
        double first_ratio_mean = 1.0;
        std::size_t gradient_steps = 0;
    };

    PpoAgent(const AgentMode& m, const PPOConfig& c, const repr::ContrastiveConfig& cc, std::size_t state_dim,
             std::mt19937_64& rng)
        : mode(m), cfg(c), contrastive(cc) {
        mode.validate();
        cfg.validate();
        if (mode.pixels()) model = repr::RepresentationModel<T>(contrastive, rng);
        const std::size_t F = feature_dim(mode, contrastive.embed_dim, state_dim);
        actor = GaussianActor<T>("actor", F, cfg.hidden, cfg.init_log_std, rng);
        value_net = Mlp<T>("value", {F, cfg.hidden, cfg.hidden, 1}, rng);
        AdamConfig opt;
        opt.learning_rate = cfg.learning_rate;
        optimizer_ = Adam<T>(trainable_params(), opt);
    }

    PpoAgent(const PpoAgent&) = delete;
    PpoAgent& operator=(const PpoAgent&) = delete;

    EncoderSet<T> encoders() { return {&model.online_visual, &model.online_tactile}; }

    ParamRefs<T> trainable_params() {
        ParamRefs<T> out;
        actor.collect(out);
        value_net.collect(out);
        for (auto* p : encoder_params(mode, encoders())) out.push_back(p);
        if (mode.contrastive()) {
            for (auto* p : model.head_params()) out.push_back(p);
        }
        return out;
    }

    ParamRefs<T> all_params() {
        ParamRefs<T> out;
        actor.collect(out);
        value_net.collect(out);
        if (mode.pixels()) {
            for (auto* p : model.all_params()) out.push_back(p);
        }
        return out;
    }

    /// Samples (or, deterministically, returns the mean of) the policy. Augmented
    /// modes act on a random crop unless deterministic; other modes on the center.
    Decision act(const sim::Observation& obs, bool deterministic, std::mt19937_64& rng) {
        Decision d;
        const std::size_t crop = contrastive.crop_size;
        if (mode.pixels()) {
            d.view_visual = d.view_tactile = repr::center_offset(obs.visual.height, crop);
            if (mode.augmented() && !deterministic) {
                std::uniform_int_distribution<std::size_t> pick(0, obs.visual.height - crop);
                d.view_visual = {pick(rng), pick(rng)};
                d.view_tactile = {pick(rng), pick(rng)};
            }
        }
        Tape<T> tape;
        const Inputs<T> in = inputs_for({&obs}, {d.view_visual}, {d.view_tactile});
        Var f = encode_features(tape, mode, encoders(), in, Binding::detached).features;
        const Tensor<T> mean = tape.value(actor.mean_net(tape, f, Binding::detached));
        d.value = static_cast<double>(tape.value(value_net(tape, f, Binding::detached))[0]);
        if (deterministic) {
            d.raw = {static_cast<double>(mean[0]), static_cast<double>(mean[1])};
        } else {
            const Tensor<T> eps = standard_normal<T>(1, kActionDim, rng);
            Tensor<T> u(Shape{1, kActionDim});
            for (std::size_t j = 0; j < kActionDim; ++j) u[j] = mean[j] + std::exp(actor.log_std.value[j]) * eps[j];
            d.raw = {static_cast<double>(u[0]), static_cast<double>(u[1])};
            Tape<T> t2;
            // Re-evaluate the density through the same graph used at training time.
            Var f2 = encode_features(t2, mode, encoders(), in, Binding::detached).features;
            d.log_prob = static_cast<double>(t2.value(actor.evaluate(t2, f2, u, Binding::detached).log_prob)[0]);
        }
        d.env_action = clip_action(d.raw[0], d.raw[1]);
        return d;
    }

    /// V(s) on the center view (bootstrap for truncated rollouts).
    double value(const sim::Observation& obs) {
        Tape<T> tape;
        Var f = encode_features(tape, mode, encoders(), center_inputs<T>({&obs}, mode, contrastive.crop_size),
                                Binding::detached)
                    .features;
        return static_cast<double>(tape.value(value_net(tape, f, Binding::detached))[0]);
    }

    /// GAE, then epochs of shuffled minibatch steps on surrogate + c_v MSE + beta L_MM
    /// - c_e entropy; momentum update after each step in m2curl mode. Clears the rollout.
    UpdateStats update(RolloutBuffer& rollout, std::mt19937_64& rng) {
        const Advantages adv = gae_advantages(rollout, cfg);
        const std::size_t n = rollout.size();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        UpdateStats stats;
        double sum_surr = 0, sum_value = 0, sum_ent = 0, sum_ratio = 0;
        repr::LossComponents mm_sum;
        std::size_t steps = 0;
        for (std::size_t epoch = 0; epoch < cfg.epochs_per_update; ++epoch) {
            std::shuffle(order.begin(), order.end(), rng);
            double epoch_ratio = 0;
            std::size_t epoch_batches = 0;
            for (std::size_t start = 0; start + 2 <= n; start += cfg.minibatch_size) {
                const std::size_t end = std::min(n, start + cfg.minibatch_size);
                std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                             order.begin() + static_cast<std::ptrdiff_t>(end));
                MinibatchLoss l = minibatch_step(rollout, adv, idx, rng);
                if (steps == 0) stats.first_ratio_mean = l.ratio_mean;
                sum_surr += l.surrogate;
                sum_value += l.value;
                sum_ent += l.entropy;
                sum_ratio += l.ratio_mean;
                epoch_ratio += l.ratio_mean;
                if (l.mm) {
                    mm_sum.loss_mm += l.mm->loss_mm;
                    mm_sum.loss_vv += l.mm->loss_vv;
                    mm_sum.loss_tt += l.mm->loss_tt;
                    mm_sum.loss_vt += l.mm->loss_vt;
                    mm_sum.loss_tv += l.mm->loss_tv;
                }
                ++steps;
                ++epoch_batches;
            }
            stats.epoch_ratio_mean.push_back(epoch_batches ? epoch_ratio / static_cast<double>(epoch_batches) : 1.0);
        }
        stats.gradient_steps = steps;
        if (steps > 0) {
            const double k = static_cast<double>(steps);
            stats.metrics["loss_actor"] = sum_surr / k;
            stats.metrics["loss_critic"] = sum_value / k;
            stats.metrics["entropy"] = sum_ent / k;
            stats.metrics["ratio_mean"] = sum_ratio / k;
            if (mode.contrastive()) {
                stats.metrics["loss_mm"] = mm_sum.loss_mm / k;
                stats.metrics["loss_vv"] = mm_sum.loss_vv / k;
                stats.metrics["loss_tt"] = mm_sum.loss_tt / k;
                stats.metrics["loss_vt"] = mm_sum.loss_vt / k;
                stats.metrics["loss_tv"] = mm_sum.loss_tv / k;
            }
        }
        rollout.clear();
        return stats;
    }

private:
    struct MinibatchLoss {
        double surrogate = 0, value = 0, entropy = 0, ratio_mean = 1;
        std::optional<repr::LossComponents> mm;
    };

    Inputs<T> inputs_for(const repr::ObsBatch& batch, const std::vector<repr::CropOffset>& vis,
                         const std::vector<repr::CropOffset>& tac) const {
        if (!mode.pixels()) return state_inputs<T>(batch);
        return pixel_inputs<T>(batch, contrastive.crop_size, vis, tac);
    }

    MinibatchLoss minibatch_step(const RolloutBuffer& rollout, const Advantages& adv,
                                 const std::vector<std::size_t>& idx, std::mt19937_64& rng) {
        const std::size_t B = idx.size();
        repr::ObsBatch obs;
        std::vector<repr::CropOffset> vis, tac;
        Tensor<T> actions(Shape{B, kActionDim}), old_lp(Shape{B, 1}), a(Shape{B, 1}), ret(Shape{B, 1});
        for (std::size_t i = 0; i < B; ++i) {
            const RolloutEntry& e = rollout.entries[idx[i]];
            obs.push_back(e.observation.get());
            vis.push_back(e.view_visual);
            tac.push_back(e.view_tactile);
            actions.at(i, 0) = static_cast<T>(e.action[0]);
            actions.at(i, 1) = static_cast<T>(e.action[1]);
            old_lp[i] = static_cast<T>(e.log_prob);
            a[i] = static_cast<T>(adv.normalized[idx[i]]);
            ret[i] = static_cast<T>(adv.returns[idx[i]]);
        }
        const Inputs<T> in = inputs_for(obs, vis, tac);

        optimizer_.zero_grad();
        Tape<T> tape;
        Features<T> f = encode_features(tape, mode, encoders(), in, Binding::trainable);
        auto ev = actor.evaluate(tape, f.features, actions, Binding::trainable);
        ClipLoss clip = ppo_clip_loss(tape, ev.log_prob, old_lp, a, cfg.clip_epsilon);
        Var v = value_net(tape, f.features, Binding::trainable);
        Var vloss = ops::mean(tape, ops::square(tape, ops::sub(tape, v, tape.constant(ret))));
        Var ent = ops::mean(tape, ev.entropy);
        Var total = ops::add(tape, clip.surrogate, ops::scale(tape, vloss, static_cast<T>(cfg.value_coef)));
        total = ops::sub(tape, total, ops::scale(tape, ent, static_cast<T>(cfg.entropy_coef)));
        MinibatchLoss out;
        // Query view = the crops acted on; key view drawn fresh. RAD draws it too so
        // that both augmented modes consume the same random stream.
        std::vector<repr::CropOffset> kv(B), kt(B);
        if (mode.augmented()) {
            std::uniform_int_distribution<std::size_t> pick(0, obs.front()->visual.height - contrastive.crop_size);
            for (std::size_t i = 0; i < B; ++i) {
                kv[i] = {pick(rng), pick(rng)};
                kt[i] = {pick(rng), pick(rng)};
            }
        }
        if (mode.contrastive()) {
            const Inputs<T> key = pixel_inputs<T>(obs, contrastive.crop_size, kv, kt);
            repr::PairEmbeddings emb;
            emb.query_visual = f.z_visual;
            emb.query_tactile = f.z_tactile;
            emb.key_visual = model.momentum_visual(tape, tape.constant(key.visual), Binding::detached);
            emb.key_tactile = model.momentum_tactile(tape, tape.constant(key.tactile), Binding::detached);
            const repr::CombinedLoss mm = repr::combined_loss(tape, model, emb, contrastive);
            total = ops::add(tape, total, ops::scale(tape, mm.total, static_cast<T>(contrastive.beta)));
            out.mm = mm.components;
        }
        out.surrogate = static_cast<double>(tape.value(clip.surrogate).item());
        out.value = static_cast<double>(tape.value(vloss).item());
        out.entropy = static_cast<double>(tape.value(ent).item());
        out.ratio_mean = clip.ratio_mean;
        tape.backward(total);
        optimizer_.step();
        if (mode.contrastive()) repr::momentum_update(model, contrastive.alpha_ema);
        return out;
    }

    Adam<T> optimizer_;
};

}  // namespace m2curl::rl
