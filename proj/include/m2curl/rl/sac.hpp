#pragma once

#include <map>
#include <optional>
#include <random>
#include <string>

#include "m2curl/numerics/adam.hpp"
#include "m2curl/repr/losses.hpp"
#include "m2curl/rl/buffers.hpp"
#include "m2curl/rl/config.hpp"
#include "m2curl/rl/features.hpp"
#include "m2curl/rl/policy.hpp"

namespace m2curl::rl {

using MetricMap = std::map<std::string, double>;

/// y = r + gamma (1 - done) [min(Q1', Q2') - alpha log pi(a'|s')], elementwise over [B, 1].
template <typename T>
Tensor<T> bellman_target(const Tensor<T>& reward, const Tensor<T>& done, const Tensor<T>& q1_next,
                         const Tensor<T>& q2_next, const Tensor<T>& log_prob_next, double gamma, double alpha) {
    Tensor<T> y(reward.shape());
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double soft = std::min<double>(q1_next[i], q2_next[i]) - alpha * static_cast<double>(log_prob_next[i]);
        y[i] = static_cast<T>(reward[i] + gamma * (1.0 - done[i]) * soft);
    }
    return y;
}

/// mean((Q1 - y)^2) + mean((Q2 - y)^2).
template <typename T>
Var twin_critic_mse(Tape<T>& tape, Var q1, Var q2, const Tensor<T>& target) {
    Var y = tape.constant(target);
    return ops::add(tape, ops::mean(tape, ops::square(tape, ops::sub(tape, q1, y))),
                    ops::mean(tape, ops::square(tape, ops::sub(tape, q2, y))));
}

/// Copies the actor encoder into the critic encoder when `step` is a multiple of `period`.
/// Returns whether a copy happened.
template <typename T>
bool sync_critic_encoder(const ConstParamRefs<T>& actor_encoder, const ParamRefs<T>& critic_encoder,
                         std::size_t step, std::size_t period) {
    if (period == 0) throw ConfigError("critic_encoder_sync_period must be positive");
    if (actor_encoder.size() != critic_encoder.size()) {
        throw ContractError("sync_critic_encoder: encoder structures differ");
    }
    for (std::size_t i = 0; i < actor_encoder.size(); ++i) {
        if (actor_encoder[i]->value.shape() != critic_encoder[i]->value.shape()) {
            throw ContractError("sync_critic_encoder: shape mismatch for " + critic_encoder[i]->name);
        }
    }
    if (step % period != 0) return false;
    copy_values(actor_encoder, critic_encoder);
    return true;
}

/// Renames every parameter of `module` from "<old>.*" to "<prefix>.*".
template <typename T, typename M>
void rename_params(M& module, const std::string& prefix) {
    ParamRefs<T> ps;
    module.collect(ps);
    for (auto* p : ps) p->name = prefix + p->name.substr(p->name.find('.'));
}

/// Replay samples turned into network inputs. For augmented modes `aug` keeps
/// both views of s (query for RL, key for L_MM); s' uses its query view only.
template <typename T>
struct SacBatch {
    Inputs<T> obs;
    Inputs<T> next_obs;
    Tensor<T> actions;
    Tensor<T> rewards;
    Tensor<T> dones;
    std::optional<repr::AugmentedPair<T>> aug;
};

/// SAC with twin critics. The actor encoder is the online encoder of the
/// representation model; the critic encoder is a detached copy refreshed every
/// `critic_encoder_sync_period` updates.
template <typename T>
class SacAgent {
public:
    AgentMode mode;
    SACConfig cfg;
    repr::ContrastiveConfig contrastive;
    repr::RepresentationModel<T> model;
    repr::Encoder<T> critic_visual;
    repr::Encoder<T> critic_tactile;
    SquashedGaussianActor<T> actor;
    QNetwork<T> q1, q2, q1_target, q2_target;
    std::size_t updates = 0;

    SacAgent(const AgentMode& m, const SACConfig& c, const repr::ContrastiveConfig& cc, std::size_t state_dim,
             std::mt19937_64& rng)
        : mode(m), cfg(c), contrastive(cc) {
        mode.validate();
        cfg.validate();
        if (mode.pixels()) {
            model = repr::RepresentationModel<T>(contrastive, rng);
            critic_visual = model.online_visual;
            critic_tactile = model.online_tactile;
            rename_params<T>(critic_visual, "critic_enc_v");
            rename_params<T>(critic_tactile, "critic_enc_t");
        }
        const std::size_t F = feature_dim(mode, contrastive.embed_dim, state_dim);
        actor = SquashedGaussianActor<T>("actor", F, cfg.hidden, cfg.log_std_min, cfg.log_std_max, rng);
        q1 = QNetwork<T>("q1", F, cfg.hidden, rng);
        q2 = QNetwork<T>("q2", F, cfg.hidden, rng);
        q1_target = q1;
        q2_target = q2;
        rename_params<T>(q1_target, "q1_target");
        rename_params<T>(q2_target, "q2_target");

        AdamConfig critic_opt;
        critic_opt.learning_rate = cfg.critic_lr;
        critic_optimizer_ = Adam<T>(critic_params(), critic_opt);
        AdamConfig actor_opt;
        actor_opt.learning_rate = cfg.actor_lr;
        actor_optimizer_ = Adam<T>(actor_trainable_params(), actor_opt);
    }

    // Optimizers point into the members, so the agent stays put.
    SacAgent(const SacAgent&) = delete;
    SacAgent& operator=(const SacAgent&) = delete;

    EncoderSet<T> actor_encoders() { return {&model.online_visual, &model.online_tactile}; }
    EncoderSet<T> critic_encoders() { return {&critic_visual, &critic_tactile}; }

    ParamRefs<T> critic_params() {
        ParamRefs<T> out;
        q1.collect(out);
        q2.collect(out);
        return out;
    }

    /// Everything the actor step trains: policy, online encoders, and heads in m2curl mode.
    ParamRefs<T> actor_trainable_params() {
        ParamRefs<T> out;
        actor.collect(out);
        for (auto* p : encoder_params(mode, actor_encoders())) out.push_back(p);
        if (mode.contrastive()) {
            for (auto* p : model.head_params()) out.push_back(p);
        }
        return out;
    }

    /// Every parameter of the agent in a fixed order (checkpoints, equality checks).
    ParamRefs<T> all_params() {
        ParamRefs<T> out;
        actor.collect(out);
        q1.collect(out);
        q2.collect(out);
        q1_target.collect(out);
        q2_target.collect(out);
        if (mode.pixels()) {
            for (auto* p : model.all_params()) out.push_back(p);
            critic_visual.collect(out);
            critic_tactile.collect(out);
        }
        return out;
    }

    /// Policy action on the center view (deterministic = tanh(mean)).
    sim::Action act(const sim::Observation& obs, bool deterministic, std::mt19937_64& rng) {
        Tape<T> tape;
        const Inputs<T> in = center_inputs<T>({&obs}, mode, contrastive.crop_size);
        Var f = encode_features(tape, mode, actor_encoders(), in, Binding::detached).features;
        Var a;
        if (deterministic) {
            a = actor.deterministic(tape, f, Binding::detached);
        } else {
            a = actor.sample(tape, f, standard_normal<T>(1, kActionDim, rng), Binding::detached).action;
        }
        const Tensor<T>& av = tape.value(a);
        return {static_cast<double>(av[0]), static_cast<double>(av[1])};
    }

    /// Samples a batch and builds inputs. Draw order: indices, s views, s' views.
    SacBatch<T> prepare_batch(const ReplayBuffer& replay, std::mt19937_64& rng) const {
        const auto samples = replay.sample(cfg.batch_size, rng);
        repr::ObsBatch obs, next;
        SacBatch<T> b;
        const std::size_t B = samples.size();
        b.actions = Tensor<T>(Shape{B, kActionDim});
        b.rewards = Tensor<T>(Shape{B, 1});
        b.dones = Tensor<T>(Shape{B, 1});
        for (std::size_t i = 0; i < B; ++i) {
            obs.push_back(samples[i]->observation.get());
            next.push_back(samples[i]->next_observation.get());
            b.actions.at(i, 0) = static_cast<T>(samples[i]->action[0]);
            b.actions.at(i, 1) = static_cast<T>(samples[i]->action[1]);
            b.rewards[i] = static_cast<T>(samples[i]->reward);
            b.dones[i] = samples[i]->done ? T(1) : T(0);
        }
        if (mode.augmented()) {
            b.aug = repr::augment_pair<T>(obs, contrastive.crop_size, rng);
            b.obs = query_inputs(*b.aug);
            b.next_obs = query_inputs(repr::augment_pair<T>(next, contrastive.crop_size, rng));
        } else {
            b.obs = center_inputs<T>(obs, mode, contrastive.crop_size);
            b.next_obs = center_inputs<T>(next, mode, contrastive.crop_size);
        }
        return b;
    }

    struct CriticLoss {
        Var loss;
        Tensor<T> target;
    };

    CriticLoss critic_loss(Tape<T>& tape, const SacBatch<T>& b, const Tensor<T>& eps_next) {
        Tensor<T> y;
        {
            Tape<T> t;
            Var nf = encode_features(t, mode, critic_encoders(), b.next_obs, Binding::detached).features;
            auto s = actor.sample(t, nf, eps_next, Binding::detached);
            Var q1n = q1_target(t, nf, s.action, Binding::detached);
            Var q2n = q2_target(t, nf, s.action, Binding::detached);
            y = bellman_target(b.rewards, b.dones, t.value(q1n), t.value(q2n), t.value(s.log_prob), cfg.gamma,
                               cfg.alpha_ent);
        }
        Var f = encode_features(tape, mode, critic_encoders(), b.obs, Binding::detached).features;
        Var a = tape.constant(b.actions);
        Var loss = twin_critic_mse(tape, q1(tape, f, a, Binding::trainable), q2(tape, f, a, Binding::trainable), y);
        return {loss, std::move(y)};
    }

    struct ActorLoss {
        Var total;
        double actor = 0.0;
        double entropy = 0.0;
        std::optional<repr::LossComponents> contrastive;
    };

    /// L'_actor = mean(alpha log pi - min Q) + beta L_MM (m2curl mode). Q uses
    /// critic-encoder features of the same view with frozen critic weights.
    ActorLoss actor_loss(Tape<T>& tape, const SacBatch<T>& b, const Tensor<T>& eps) {
        Features<T> fa = encode_features(tape, mode, actor_encoders(), b.obs, Binding::trainable);
        auto s = actor.sample(tape, fa.features, eps, Binding::trainable);
        Var fc = encode_features(tape, mode, critic_encoders(), b.obs, Binding::detached).features;
        Var q = ops::minimum(tape, q1(tape, fc, s.action, Binding::detached), q2(tape, fc, s.action, Binding::detached));
        Var l = ops::mean(tape, ops::sub(tape, ops::scale(tape, s.log_prob, static_cast<T>(cfg.alpha_ent)), q));
        ActorLoss out;
        out.actor = static_cast<double>(tape.value(l).item());
        {
            double lp = 0.0;
            for (T v : tape.value(s.log_prob).data()) lp += static_cast<double>(v);
            out.entropy = -lp / static_cast<double>(b.obs.batch);
        }
        out.total = l;
        if (mode.contrastive()) {
            if (!b.aug) throw ContractError("actor_loss: m2curl mode needs augmented views");
            repr::PairEmbeddings emb;
            emb.query_visual = fa.z_visual;
            emb.query_tactile = fa.z_tactile;
            emb.key_visual = model.momentum_visual(tape, tape.constant(b.aug->key_visual), Binding::detached);
            emb.key_tactile = model.momentum_tactile(tape, tape.constant(b.aug->key_tactile), Binding::detached);
            const repr::CombinedLoss mm = repr::combined_loss(tape, model, emb, contrastive);
            out.total = ops::add(tape, l, ops::scale(tape, mm.total, static_cast<T>(contrastive.beta)));
            out.contrastive = mm.components;
        }
        return out;
    }

    /// Critic step, actor step, momentum update, polyak, critic-encoder sync, in that order.
    MetricMap update(const ReplayBuffer& replay, std::mt19937_64& rng) {
        const SacBatch<T> b = prepare_batch(replay, rng);
        const Tensor<T> eps_next = standard_normal<T>(b.obs.batch, kActionDim, rng);
        const Tensor<T> eps = standard_normal<T>(b.obs.batch, kActionDim, rng);
        MetricMap m;

        critic_optimizer_.zero_grad();
        {
            Tape<T> tape;
            CriticLoss cl = critic_loss(tape, b, eps_next);
            m["loss_critic"] = static_cast<double>(tape.value(cl.loss).item());
            tape.backward(cl.loss);
        }
        critic_optimizer_.step();

        actor_optimizer_.zero_grad();
        {
            Tape<T> tape;
            ActorLoss al = actor_loss(tape, b, eps);
            m["loss_actor"] = al.actor;
            m["entropy"] = al.entropy;
            if (al.contrastive) {
                m["loss_mm"] = al.contrastive->loss_mm;
                m["loss_vv"] = al.contrastive->loss_vv;
                m["loss_tt"] = al.contrastive->loss_tt;
                m["loss_vt"] = al.contrastive->loss_vt;
                m["loss_tv"] = al.contrastive->loss_tv;
            }
            tape.backward(al.total);
        }
        actor_optimizer_.step();

        if (mode.contrastive()) repr::momentum_update(model, contrastive.alpha_ema);
        polyak_update(m2curl::as_const(params_of<T>(q1)), params_of<T>(q1_target), cfg.polyak);
        polyak_update(m2curl::as_const(params_of<T>(q2)), params_of<T>(q2_target), cfg.polyak);
        ++updates;
        if (mode.pixels()) {
            sync_critic_encoder(m2curl::as_const(encoder_params(mode, actor_encoders())),
                                encoder_params(mode, critic_encoders()), updates, cfg.critic_encoder_sync_period);
        }
        return m;
    }

private:
    Adam<T> critic_optimizer_;
    Adam<T> actor_optimizer_;
};

}  // namespace m2curl::rl
