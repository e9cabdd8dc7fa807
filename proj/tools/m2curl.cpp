#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "m2curl/harness/analysis.hpp"
#include "m2curl/harness/experiment.hpp"
#include "m2curl/harness/presets.hpp"
#include "m2curl/harness/selfcheck.hpp"

using namespace m2curl;
using namespace m2curl::harness;

namespace {

std::vector<std::size_t> parse_milestones(const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stoul(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ConfigError("--milestones: '" + item + "' is not a step count");
        }
    }
    if (out.empty()) throw ConfigError("--milestones: empty list");
    return out;
}

int report(const std::vector<CheckResult>& results) {
    bool ok = true;
    for (const auto& r : results) {
        std::cout << (r.ok ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.ok;
    }
    return ok ? 0 : 1;
}

void print_run(const RunConfig& cfg, const RunResult& r) {
    std::cout << cfg.name << " seed " << cfg.seed << ": final eval return " << r.final_eval_return
              << " (random policy " << r.random_policy_return << ") -> " << cfg.output_dir << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Visuotactile contrastive RL experiments"};
    app.require_subcommand(1);

    std::string config_path, outdir;
    std::optional<std::uint64_t> seed;
    auto* train = app.add_subcommand("train", "Train one run from a config file");
    train->add_option("--config", config_path, "Run config JSON")->required();
    train->add_option("--seed", seed, "Override the config seed");
    train->add_option("--outdir", outdir, "Override the output directory");

    std::string preset_name;
    std::size_t parallel = 1;
    auto* pre = app.add_subcommand("preset", "Run every config of a named experiment grid");
    pre->add_option("name", preset_name, "table1-grid, ablation-intra-inter or unimodal")->required();
    pre->add_option("--outdir", outdir, "Root directory for the runs")->required();
    pre->add_option("--parallel", parallel, "Concurrent runs")->check(CLI::PositiveNumber);
    bool list_only = false;
    pre->add_flag("--list", list_only, "Print the expanded configs without training");

    std::vector<std::string> dirs;
    std::string milestones = "20000,100000", csv_path;
    auto* sum = app.add_subcommand("summarize", "Milestone table (mean ± std across seeds)");
    sum->add_option("dirs", dirs, "Run directories")->required();
    sum->add_option("--milestones", milestones, "Comma-separated env steps");
    sum->add_option("--csv", csv_path, "Also write the table as CSV");

    std::string metric = "episode_return", out_path = "curves.svg";
    auto* plot = app.add_subcommand("plot", "SVG learning curves with min-max bands");
    plot->add_option("dirs", dirs, "Run directories")->required();
    plot->add_option("--metric", metric, "Metric key");
    plot->add_option("--out", out_path, "Output SVG path");

    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    std::string scratch = (std::filesystem::temp_directory_path() / "m2curl_selfcheck").string();
    auto* self = app.add_subcommand("selfcheck", "Loss oracles and train determinism");
    self->add_option("--scratch", scratch, "Scratch directory for the determinism runs");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*train) {
            RunConfig cfg = parse_config(std::filesystem::path(config_path));
            if (seed) cfg.seed = *seed;
            if (!outdir.empty()) cfg.output_dir = outdir;
            print_run(cfg, run_experiment(cfg));
        } else if (*pre) {
            const auto configs = preset(preset_name, outdir);
            if (list_only) {
                for (const auto& c : configs) std::cout << serialize(c).dump() << '\n';
                return 0;
            }
            std::atomic<std::size_t> next{0};
            std::mutex io;
            std::vector<std::string> errors;
            auto worker = [&] {
                for (std::size_t i = next++; i < configs.size(); i = next++) {
                    try {
                        const auto r = run_experiment(configs[i]);
                        std::lock_guard lock(io);
                        print_run(configs[i], r);
                    } catch (const std::exception& e) {
                        std::lock_guard lock(io);
                        errors.push_back(configs[i].output_dir + ": " + e.what());
                    }
                }
            };
            std::vector<std::thread> pool;
            for (std::size_t k = 0; k < std::min(parallel, configs.size()); ++k) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
            if (!errors.empty()) throw std::runtime_error(std::to_string(errors.size()) + " run(s) failed; first: " +
                                                          errors.front());
        } else if (*sum) {
            std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
            const auto table = summarize_runs(paths, parse_milestones(milestones));
            for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << table.text();
            if (!csv_path.empty()) {
                std::ofstream out(csv_path);
                out << table.csv();
                if (!out) throw std::runtime_error("cannot write " + csv_path);
            }
        } else if (*plot) {
            std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
            plot_curves(paths, metric, out_path);
            std::cout << "wrote " << out_path << '\n';
        } else if (*grad) {
            return report(gradient_checks());
        } else if (*self) {
            std::filesystem::remove_all(scratch);
            auto results = loss_oracle_checks();
            results.push_back(determinism_check(scratch));
            return report(results);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
