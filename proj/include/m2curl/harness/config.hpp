#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "m2curl/repr/config.hpp"
#include "m2curl/rl/config.hpp"
#include "m2curl/rl/mode.hpp"
#include "m2curl/sim/environment.hpp"

namespace m2curl::harness {

using nlohmann::json;

/// One training run. Exactly one of `sac` / `ppo` is set, matching `mode.algorithm`.
struct RunConfig {
    sim::EnvKind env_kind = sim::EnvKind::push_world;
    sim::EnvConfig env;
    rl::AgentMode mode;
    repr::ContrastiveConfig contrastive;
    std::optional<rl::SACConfig> sac;
    std::optional<rl::PPOConfig> ppo;
    std::size_t total_env_steps = 20000;
    std::size_t eval_every = 2000;
    std::size_t eval_episodes = 10;
    /// 0 writes only the final checkpoint.
    std::size_t checkpoint_every = 10000;
    std::uint64_t seed = 0;
    std::string output_dir;
    /// Cell name used to group seeds in summaries and plots; defaults to the mode label.
    std::string name;

    void validate() const {
        mode.validate();
        if (mode.algorithm == rl::Algorithm::sac && (!sac || ppo)) {
            throw ConfigError("sac: algorithm sac needs a sac section and no ppo section");
        }
        if (mode.algorithm == rl::Algorithm::ppo && (!ppo || sac)) {
            throw ConfigError("ppo: algorithm ppo needs a ppo section and no sac section");
        }
        if (sac) sac->validate();
        if (ppo) ppo->validate();
        if (env.image_size < 7) throw ConfigError("env_config.image_size: must be >= 7");
        if (env.horizon == 0) throw ConfigError("env_config.horizon: must be positive");
        if (mode.pixels()) contrastive.validate(env.image_size);
        if (eval_every == 0) throw ConfigError("eval_every: must be positive");
        if (eval_episodes == 0) throw ConfigError("eval_episodes: must be positive");
        if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
        if (name.empty()) throw ConfigError("name: must not be empty");
    }

    friend bool operator==(const RunConfig& a, const RunConfig& b) { return to_json_impl(a) == to_json_impl(b); }

    static json to_json_impl(const RunConfig& c);
};

namespace detail {

/// Reads the keys of one JSON object, rejecting unknown or ill-typed entries.
class FieldReader {
public:
    FieldReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
        if (!obj_.is_object()) throw ParseError(where() + "must be a JSON object");
    }

    template <typename V>
    void read(const std::string& key, V& out) {
        seen_.insert(key);
        auto it = obj_.find(key);
        if (it == obj_.end()) return;
        try {
            if constexpr (std::is_unsigned_v<V>) {
                if (!it->is_number_integer() || it->template get<long long>() < 0) throw ParseError("");
            } else if constexpr (std::is_floating_point_v<V>) {
                if (!it->is_number()) throw ParseError("");
            } else if constexpr (std::is_same_v<V, std::string>) {
                if (!it->is_string()) throw ParseError("");
            }
            out = it->template get<V>();
        } catch (const std::exception&) {
            throw ParseError(field(key) + ": expected " + type_name<V>() + ", got " + it->dump());
        }
    }

    const json* sub(const std::string& key) {
        seen_.insert(key);
        auto it = obj_.find(key);
        return it == obj_.end() ? nullptr : &*it;
    }

    bool has(const std::string& key) const { return obj_.contains(key); }

    std::string field(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    void finish() const {
        for (const auto& [k, _] : obj_.items()) {
            if (!seen_.count(k)) throw ParseError(field(k) + ": unknown key");
        }
    }

private:
    std::string where() const { return prefix_.empty() ? "config " : prefix_ + ": "; }

    template <typename V>
    static std::string type_name() {
        if constexpr (std::is_unsigned_v<V>) return "a non-negative integer";
        else if constexpr (std::is_floating_point_v<V>) return "a number";
        else return "a string";
    }

    const json& obj_;
    std::string prefix_;
    std::set<std::string> seen_;
};

inline void read_contrastive(const json& j, repr::ContrastiveConfig& c) {
    FieldReader r(j, "contrastive");
    r.read("lambda_vv", c.lambda_vv);
    r.read("lambda_tt", c.lambda_tt);
    r.read("lambda_vt", c.lambda_vt);
    r.read("lambda_tv", c.lambda_tv);
    r.read("beta", c.beta);
    r.read("tau", c.tau);
    r.read("alpha_ema", c.alpha_ema);
    r.read("embed_dim", c.embed_dim);
    r.read("head_hidden", c.head_hidden);
    r.read("crop_size", c.crop_size);
    r.finish();
}

inline json write_contrastive(const repr::ContrastiveConfig& c) {
    return {{"lambda_vv", c.lambda_vv}, {"lambda_tt", c.lambda_tt}, {"lambda_vt", c.lambda_vt},
            {"lambda_tv", c.lambda_tv}, {"beta", c.beta},           {"tau", c.tau},
            {"alpha_ema", c.alpha_ema}, {"embed_dim", c.embed_dim}, {"head_hidden", c.head_hidden},
            {"crop_size", c.crop_size}};
}

inline void read_sac(const json& j, rl::SACConfig& c) {
    FieldReader r(j, "sac");
    r.read("gamma", c.gamma);
    r.read("alpha_ent", c.alpha_ent);
    r.read("polyak", c.polyak);
    r.read("batch_size", c.batch_size);
    r.read("critic_encoder_sync_period", c.critic_encoder_sync_period);
    r.read("replay_capacity", c.replay_capacity);
    r.read("init_steps", c.init_steps);
    r.read("update_every", c.update_every);
    r.read("hidden", c.hidden);
    r.read("actor_lr", c.actor_lr);
    r.read("critic_lr", c.critic_lr);
    r.read("log_std_min", c.log_std_min);
    r.read("log_std_max", c.log_std_max);
    r.finish();
}

inline json write_sac(const rl::SACConfig& c) {
    return {{"gamma", c.gamma},
            {"alpha_ent", c.alpha_ent},
            {"polyak", c.polyak},
            {"batch_size", c.batch_size},
            {"critic_encoder_sync_period", c.critic_encoder_sync_period},
            {"replay_capacity", c.replay_capacity},
            {"init_steps", c.init_steps},
            {"update_every", c.update_every},
            {"hidden", c.hidden},
            {"actor_lr", c.actor_lr},
            {"critic_lr", c.critic_lr},
            {"log_std_min", c.log_std_min},
            {"log_std_max", c.log_std_max}};
}

inline void read_ppo(const json& j, rl::PPOConfig& c) {
    FieldReader r(j, "ppo");
    r.read("clip_epsilon", c.clip_epsilon);
    r.read("gae_lambda", c.gae_lambda);
    r.read("gamma", c.gamma);
    r.read("epochs_per_update", c.epochs_per_update);
    r.read("rollout_horizon", c.rollout_horizon);
    r.read("minibatch_size", c.minibatch_size);
    r.read("value_coef", c.value_coef);
    r.read("entropy_coef", c.entropy_coef);
    r.read("hidden", c.hidden);
    r.read("learning_rate", c.learning_rate);
    r.read("init_log_std", c.init_log_std);
    r.finish();
}

inline json write_ppo(const rl::PPOConfig& c) {
    return {{"clip_epsilon", c.clip_epsilon},
            {"gae_lambda", c.gae_lambda},
            {"gamma", c.gamma},
            {"epochs_per_update", c.epochs_per_update},
            {"rollout_horizon", c.rollout_horizon},
            {"minibatch_size", c.minibatch_size},
            {"value_coef", c.value_coef},
            {"entropy_coef", c.entropy_coef},
            {"hidden", c.hidden},
            {"learning_rate", c.learning_rate},
            {"init_log_std", c.init_log_std}};
}

inline void read_env(const json& j, sim::EnvConfig& c) {
    FieldReader r(j, "env_config");
    r.read("image_size", c.image_size);
    r.read("horizon", c.horizon);
    r.finish();
}

template <typename F>
auto named(const std::string& field, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ParseError(field + ": " + e.what());
    }
}

}  // namespace detail

inline json RunConfig::to_json_impl(const RunConfig& c) {
    json j{{"env", sim::to_string(c.env_kind)},
           {"env_config", {{"image_size", c.env.image_size}, {"horizon", c.env.horizon}}},
           {"algorithm", rl::to_string(c.mode.algorithm)},
           {"representation", rl::to_string(c.mode.representation)},
           {"modalities", rl::to_string(c.mode.modalities)},
           {"contrastive", detail::write_contrastive(c.contrastive)},
           {"total_env_steps", c.total_env_steps},
           {"eval_every", c.eval_every},
           {"eval_episodes", c.eval_episodes},
           {"checkpoint_every", c.checkpoint_every},
           {"seed", c.seed},
           {"output_dir", c.output_dir},
           {"name", c.name}};
    if (c.sac) j["sac"] = detail::write_sac(*c.sac);
    if (c.ppo) j["ppo"] = detail::write_ppo(*c.ppo);
    return j;
}

inline json serialize(const RunConfig& c) { return RunConfig::to_json_impl(c); }

/// Builds a validated config from JSON. Required keys: env, algorithm, seed.
/// Missing sections take the defaults of their modules; unknown keys are errors.
inline RunConfig parse_config(const json& j) {
    detail::FieldReader r(j, "");
    for (const char* key : {"env", "algorithm", "seed"}) {
        if (!r.has(key)) throw ParseError(std::string(key) + ": required key missing");
    }
    RunConfig c;
    std::string env_name, algorithm, representation = "m2curl", modalities = "both";
    r.read("env", env_name);
    r.read("algorithm", algorithm);
    r.read("representation", representation);
    r.read("modalities", modalities);
    c.env_kind = detail::named("env", [&] { return sim::parse_env_kind(env_name); });
    c.mode.algorithm = detail::named("algorithm", [&] { return rl::parse_algorithm(algorithm); });
    c.mode.representation = detail::named("representation", [&] { return rl::parse_representation(representation); });
    c.mode.modalities = detail::named("modalities", [&] { return rl::parse_modalities(modalities); });

    c.contrastive = c.mode.algorithm == rl::Algorithm::sac ? repr::ContrastiveConfig::for_sac()
                                                           : repr::ContrastiveConfig::for_ppo();
    if (const json* s = r.sub("env_config")) detail::read_env(*s, c.env);
    if (const json* s = r.sub("contrastive")) detail::read_contrastive(*s, c.contrastive);
    const json* sac = r.sub("sac");
    const json* ppo = r.sub("ppo");
    if (c.mode.algorithm == rl::Algorithm::sac) {
        if (ppo) throw ParseError("ppo: section given for algorithm sac");
        c.sac.emplace();
        if (sac) detail::read_sac(*sac, *c.sac);
    } else {
        if (sac) throw ParseError("sac: section given for algorithm ppo");
        c.ppo.emplace();
        if (ppo) detail::read_ppo(*ppo, *c.ppo);
    }
    r.read("total_env_steps", c.total_env_steps);
    r.read("eval_every", c.eval_every);
    r.read("eval_episodes", c.eval_episodes);
    r.read("checkpoint_every", c.checkpoint_every);
    r.read("seed", c.seed);
    r.read("output_dir", c.output_dir);
    r.read("name", c.name);
    r.finish();
    if (c.name.empty()) c.name = c.mode.label();
    if (c.output_dir.empty()) c.output_dir = "runs/" + c.name + "-seed" + std::to_string(c.seed);
    detail::named("config", [&] {
        c.validate();
        return 0;
    });
    return c;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": malformed JSON: " + e.what());
    }
    return parse_config(j);
}

}  // namespace m2curl::harness
