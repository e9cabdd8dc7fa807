#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "m2curl/harness/config.hpp"
#include "m2curl/harness/metrics.hpp"
#include "m2curl/numerics/checkpoint.hpp"
#include "m2curl/rl/ppo.hpp"
#include "m2curl/rl/sac.hpp"
#include "m2curl/sim/edge_follow.hpp"
#include "m2curl/sim/push_world.hpp"

namespace m2curl::harness {

/// Independent seed streams derived from the run seed.
enum class Stream : std::uint32_t { agent = 1, train_env = 2, eval_env = 3, random_policy = 4 };

inline std::uint64_t derive_seed(std::uint64_t seed, Stream stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

struct EvalResult {
    double mean = 0.0;
    double std = 0.0;
};

/// Runs `episodes` episodes on `env` with reset seeds base, base+1, ...;
/// `policy(obs)` returns the action.
template <typename Policy>
EvalResult evaluate_episodes(sim::Environment& env, std::uint64_t base_seed, std::size_t episodes, Policy&& policy) {
    std::vector<double> returns;
    for (std::size_t k = 0; k < episodes; ++k) {
        sim::Observation obs = env.reset(base_seed + k);
        double total = 0.0;
        for (;;) {
            auto r = env.step(policy(obs));
            total += r.reward;
            if (r.done) break;
            obs = std::move(r.observation);
        }
        returns.push_back(total);
    }
    EvalResult e;
    for (double x : returns) e.mean += x / static_cast<double>(returns.size());
    for (double x : returns) e.std += (x - e.mean) * (x - e.mean) / static_cast<double>(returns.size());
    e.std = std::sqrt(e.std);
    return e;
}

/// Mean eval return of a uniform-random policy on the run's eval episodes.
inline EvalResult random_policy_return(const RunConfig& cfg) {
    auto env = sim::make_environment(cfg.env_kind, cfg.env);
    std::mt19937_64 rng(derive_seed(cfg.seed, Stream::random_policy));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    return evaluate_episodes(*env, derive_seed(cfg.seed, Stream::eval_env), cfg.eval_episodes,
                             [&](const sim::Observation&) { return sim::Action{u(rng), u(rng)}; });
}

struct RunResult {
    std::filesystem::path metrics_path;
    std::vector<std::filesystem::path> checkpoints;  // manifest stems
    double final_eval_return = 0.0;
    double random_policy_return = 0.0;
};

namespace detail {

/// Running mean of agent update metrics between two train records.
class MetricAverager {
public:
    void add(const rl::MetricMap& m) {
        for (const auto& [k, v] : m) {
            sums_[k] += v;
            counts_[k] += 1;
        }
        ++updates_;
    }
    void flush_into(std::map<std::string, double>& out) {
        for (const auto& [k, v] : sums_) out[k] = v / static_cast<double>(counts_[k]);
        out["updates"] = static_cast<double>(updates_);
        sums_.clear();
        counts_.clear();
        updates_ = 0;
    }

private:
    std::map<std::string, double> sums_;
    std::map<std::string, double> counts_;
    std::size_t updates_ = 0;
};

template <typename Agent>
void save_agent(Agent& agent, const RunConfig& cfg, std::size_t env_steps, RunResult& result) {
    auto ck = Checkpoint::from_params<float>(m2curl::as_const(agent.all_params()));
    ck.metadata = {{"env_steps", env_steps}, {"name", cfg.name}, {"seed", cfg.seed}};
    const auto stem = std::filesystem::path(cfg.output_dir) / "checkpoints" / ("step_" + std::to_string(env_steps));
    save_checkpoint(ck, stem);
    result.checkpoints.push_back(stem);
}

/// Shared driver: `Loop` supplies act/observe hooks for the algorithm.
template <typename Agent, typename Loop>
RunResult drive(Agent& agent, const RunConfig& cfg, Loop& loop) {
    namespace fs = std::filesystem;
    RunResult result;
    fs::create_directories(cfg.output_dir);
    {
        std::ofstream out(fs::path(cfg.output_dir) / "config.json");
        out << serialize(cfg).dump(2) << '\n';
        if (!out) throw std::runtime_error("cannot write config.json in " + cfg.output_dir);
    }
    result.metrics_path = fs::path(cfg.output_dir) / "metrics.jsonl";
    MetricsWriter writer(result.metrics_path, fs::path(cfg.output_dir) / "timing.jsonl");

    auto env = sim::make_environment(cfg.env_kind, cfg.env);
    auto eval_env = sim::make_environment(cfg.env_kind, cfg.env);
    const std::uint64_t eval_seed = derive_seed(cfg.seed, Stream::eval_env);
    const std::uint64_t train_seed = derive_seed(cfg.seed, Stream::train_env);
    std::size_t step = 0;

    auto eval = [&](std::map<std::string, double> extra) {
        const EvalResult e = evaluate_episodes(*eval_env, eval_seed, cfg.eval_episodes,
                                               [&](const sim::Observation& o) { return loop.eval_action(o); });
        extra["episode_return"] = e.mean;
        extra["episode_return_std"] = e.std;
        writer.write({"eval", step, std::move(extra)});
        result.final_eval_return = e.mean;
    };

    try {
        result.random_policy_return = random_policy_return(cfg).mean;
        eval({{"random_policy_return", result.random_policy_return}});

        std::size_t episode = 0;
        auto obs = std::make_shared<const sim::Observation>(env->reset(train_seed + episode));
        double episode_return = 0.0;
        MetricAverager avg;
        while (step < cfg.total_env_steps) {
            ++step;
            auto r = loop.step(*env, obs, avg);
            episode_return += r.reward;
            if (r.done) {
                std::map<std::string, double> rec{{"train_episode_return", episode_return}};
                avg.flush_into(rec);
                writer.write({"train", step, std::move(rec)});
                episode_return = 0.0;
                obs = std::make_shared<const sim::Observation>(env->reset(train_seed + ++episode));
            } else {
                obs = std::make_shared<const sim::Observation>(std::move(r.observation));
            }
            if (step % cfg.eval_every == 0) eval({});
            if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) save_agent(agent, cfg, step, result);
        }
        if (result.checkpoints.empty() || result.checkpoints.back().filename() != "step_" + std::to_string(step)) {
            save_agent(agent, cfg, step, result);
        }
    } catch (const std::exception& e) {
        writer.write_status(step, "failed", e.what());
        throw;
    }
    return result;
}

class SacLoop {
public:
    SacLoop(rl::SacAgent<float>& agent, const RunConfig& cfg, std::mt19937_64& rng)
        : agent_(agent), cfg_(*cfg.sac), replay_(cfg.sac->replay_capacity), rng_(rng) {}

    sim::Action eval_action(const sim::Observation& o) { return agent_.act(o, true, rng_); }

    sim::StepResult step(sim::Environment& env, const std::shared_ptr<const sim::Observation>& obs,
                         MetricAverager& avg) {
        ++steps_;
        sim::Action a;
        if (steps_ <= cfg_.init_steps) {
            std::uniform_real_distribution<double> u(-1.0, 1.0);
            a = {u(rng_), u(rng_)};
        } else {
            a = agent_.act(*obs, false, rng_);
        }
        auto r = env.step(a);
        // Episodes end only at the horizon, so every stored transition bootstraps.
        replay_.push({obs, a, r.reward, std::make_shared<const sim::Observation>(r.observation), false});
        if (steps_ > cfg_.init_steps && steps_ % cfg_.update_every == 0 && replay_.size() >= cfg_.batch_size) {
            avg.add(agent_.update(replay_, rng_));
        }
        return r;
    }

private:
    rl::SacAgent<float>& agent_;
    const rl::SACConfig& cfg_;
    rl::ReplayBuffer replay_;
    std::mt19937_64& rng_;
    std::size_t steps_ = 0;
};

class PpoLoop {
public:
    PpoLoop(rl::PpoAgent<float>& agent, const RunConfig& cfg, std::mt19937_64& rng)
        : agent_(agent), cfg_(*cfg.ppo), rng_(rng) {}

    sim::Action eval_action(const sim::Observation& o) { return agent_.act(o, true, rng_).env_action; }

    sim::StepResult step(sim::Environment& env, const std::shared_ptr<const sim::Observation>& obs,
                         MetricAverager& avg) {
        const auto d = agent_.act(*obs, false, rng_);
        auto r = env.step(d.env_action);
        double reward = r.reward;
        // Horizon truncation: fold the bootstrap into the reward and cut the trace.
        if (r.done) reward += cfg_.gamma * agent_.value(r.observation);
        rollout_.entries.push_back({obs, d.raw, d.log_prob, d.value, reward, r.done, d.view_visual, d.view_tactile});
        if (rollout_.size() == cfg_.rollout_horizon) {
            rollout_.bootstrap_value = r.done ? 0.0 : agent_.value(r.observation);
            avg.add(agent_.update(rollout_, rng_).metrics);
        }
        return r;
    }

private:
    rl::PpoAgent<float>& agent_;
    const rl::PPOConfig& cfg_;
    rl::RolloutBuffer rollout_;
    std::mt19937_64& rng_;
};

}  // namespace detail

/// Trains one run: initial eval (with the random-policy baseline), then
/// total_env_steps of interaction with an eval every eval_every steps.
/// Writes config.json, metrics.jsonl, timing.jsonl and checkpoints/ under output_dir.
inline RunResult run_experiment(const RunConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(derive_seed(cfg.seed, Stream::agent));
    const std::size_t state_dim = sim::make_environment(cfg.env_kind, cfg.env)->state_dim();
    if (cfg.mode.algorithm == rl::Algorithm::sac) {
        rl::SacAgent<float> agent(cfg.mode, *cfg.sac, cfg.contrastive, state_dim, rng);
        detail::SacLoop loop(agent, cfg, rng);
        return detail::drive(agent, cfg, loop);
    }
    rl::PpoAgent<float> agent(cfg.mode, *cfg.ppo, cfg.contrastive, state_dim, rng);
    detail::PpoLoop loop(agent, cfg, rng);
    return detail::drive(agent, cfg, loop);
}

}  // namespace m2curl::harness
