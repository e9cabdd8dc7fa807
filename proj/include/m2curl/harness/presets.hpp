#pragma once

#include <string>
#include <vector>

#include "m2curl/harness/config.hpp"

namespace m2curl::harness {

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"table1-grid", "ablation-intra-inter", "unimodal"};
    return names;
}

/// The desk-scale setting every preset run starts from: PushWorld at 20k env steps.
inline RunConfig desk_scale(rl::Algorithm algorithm, std::uint64_t seed) {
    nlohmann::json j{{"env", "push_world"},
                     {"algorithm", rl::to_string(algorithm)},
                     {"seed", seed},
                     {"env_config", {{"image_size", 32}, {"horizon", 50}}},
                     {"total_env_steps", 20000},
                     {"eval_every", 2000},
                     {"eval_episodes", 10},
                     {"checkpoint_every", 0}};
    j["contrastive"] = {{"crop_size", 28}, {"embed_dim", 32}, {"head_hidden", 64}};
    if (algorithm == rl::Algorithm::sac) {
        j["sac"] = {{"batch_size", 32}, {"hidden", 64}, {"update_every", 2}, {"init_steps", 1000}, {"alpha_ent", 0.003}};
    } else {
        j["ppo"] = {{"rollout_horizon", 1000}, {"minibatch_size", 50}, {"epochs_per_update", 4},
                    {"hidden", 64},           {"learning_rate", 1e-3}};
    }
    return parse_config(j);
}

namespace detail {

inline RunConfig with_mode(RunConfig c, rl::Representation r, rl::Modalities m, const std::string& outdir,
                           const std::string& name = "") {
    c.mode.representation = r;
    c.mode.modalities = m;
    c.name = name.empty() ? c.mode.label() : name;
    c.output_dir = outdir + "/" + c.name + "-seed" + std::to_string(c.seed);
    return c;
}

}  // namespace detail

/// Expands a named experiment grid into validated run configs under `outdir`.
inline std::vector<RunConfig> preset(const std::string& name, const std::string& outdir = "runs") {
    using rl::Algorithm;
    using rl::Modalities;
    using rl::Representation;
    const std::vector<std::uint64_t> seeds{0, 1, 2};
    std::vector<RunConfig> out;
    if (name == "table1-grid") {
        for (auto rep : {Representation::m2curl, Representation::rad, Representation::vanilla, Representation::state})
            for (auto alg : {Algorithm::sac, Algorithm::ppo})
                for (auto s : seeds) out.push_back(detail::with_mode(desk_scale(alg, s), rep, Modalities::both, outdir));
    } else if (name == "ablation-intra-inter") {
        struct Cell {
            const char* name;
            double vv, tt, vt, tv;
        };
        for (const Cell& cell : {Cell{"m2curl-sac-all", 1, 1, 1, 1}, Cell{"m2curl-sac-intra", 1, 1, 0, 0},
                                 Cell{"m2curl-sac-inter", 0, 0, 1, 1}})
            for (auto s : seeds) {
                RunConfig c = detail::with_mode(desk_scale(Algorithm::sac, s), Representation::m2curl,
                                                Modalities::both, outdir, cell.name);
                c.contrastive.lambda_vv = cell.vv;
                c.contrastive.lambda_tt = cell.tt;
                c.contrastive.lambda_vt = cell.vt;
                c.contrastive.lambda_tv = cell.tv;
                out.push_back(std::move(c));
            }
    } else if (name == "unimodal") {
        // Single-modality runs keep augmentation but drop the contrastive loss.
        for (auto m : {Modalities::both, Modalities::visual_only, Modalities::tactile_only})
            for (auto alg : {Algorithm::sac, Algorithm::ppo})
                for (auto s : seeds) {
                    const auto rep = m == Modalities::both ? Representation::m2curl : Representation::rad;
                    out.push_back(detail::with_mode(desk_scale(alg, s), rep, m, outdir));
                }
    } else {
        std::string valid;
        for (const auto& n : preset_names()) valid += (valid.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset '" + name + "' (valid: " + valid + ")");
    }
    for (const auto& c : out) c.validate();
    return out;
}

}  // namespace m2curl::harness
