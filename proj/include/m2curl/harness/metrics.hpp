#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "m2curl/errors.hpp"

namespace m2curl::harness {

/// Record kinds in metrics.jsonl.
///   eval:   episode_return, episode_return_std, random_policy_return (initial record only)
///   train:  train_episode_return, updates, loss_critic, loss_actor, entropy, ratio_mean,
///           loss_mm, loss_vv, loss_tt, loss_vt, loss_tv (when the agent reports them)
///   status: written only when a run aborts; carries "status" and "error"
struct MetricsRecord {
    std::string kind;
    std::size_t env_steps = 0;
    std::map<std::string, double> scalars;
};

/// Append-only JSONL writer. Wall-clock time goes to a sidecar file so that the
/// metrics file itself is a pure function of config and seed.
class MetricsWriter {
public:
    MetricsWriter(const std::filesystem::path& metrics_path, const std::filesystem::path& timing_path)
        : metrics_(metrics_path, std::ios::binary | std::ios::trunc),
          timing_(timing_path, std::ios::binary | std::ios::trunc),
          start_(std::chrono::steady_clock::now()) {
        if (!metrics_) throw std::runtime_error("cannot write " + metrics_path.string());
        if (!timing_) throw std::runtime_error("cannot write " + timing_path.string());
    }

    void write(const MetricsRecord& rec) {
        if (rec.env_steps < last_steps_) {
            throw ContractError("metrics env_steps went backwards: " + std::to_string(rec.env_steps) + " after " +
                                std::to_string(last_steps_));
        }
        last_steps_ = rec.env_steps;
        nlohmann::json j{{"kind", rec.kind}, {"env_steps", rec.env_steps}, {"metrics", rec.scalars}};
        metrics_ << j.dump() << '\n';
        metrics_.flush();
        const auto ms =
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_).count();
        timing_ << nlohmann::json{{"kind", rec.kind}, {"env_steps", rec.env_steps}, {"wall_ms", ms}}.dump() << '\n';
        timing_.flush();
        if (!metrics_ || !timing_) throw std::runtime_error("failed writing metrics");
    }

    void write_status(std::size_t env_steps, const std::string& status, const std::string& error) {
        nlohmann::json j{{"kind", "status"}, {"env_steps", env_steps}, {"status", status}, {"error", error}};
        metrics_ << j.dump() << '\n';
        metrics_.flush();
    }

private:
    std::ofstream metrics_;
    std::ofstream timing_;
    std::chrono::steady_clock::time_point start_;
    std::size_t last_steps_ = 0;
};

/// Reads every record of a metrics file; status records keep an empty scalar map.
inline std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open metrics file " + path.string());
    std::vector<MetricsRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            MetricsRecord r;
            r.kind = j.at("kind").get<std::string>();
            r.env_steps = j.at("env_steps").get<std::size_t>();
            if (j.contains("metrics")) {
                for (const auto& [k, v] : j.at("metrics").items()) {
                    if (v.is_number()) r.scalars[k] = v.get<double>();
                }
            }
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace m2curl::harness
