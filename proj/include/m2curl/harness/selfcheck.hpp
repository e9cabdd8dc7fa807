#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "m2curl/harness/experiment.hpp"
#include "m2curl/numerics/gradcheck.hpp"
#include "m2curl/repr/losses.hpp"

namespace m2curl::harness {

struct CheckResult {
    std::string name;
    bool ok = false;
    std::string detail;
};

namespace detail {

inline Tensor<double> gaussian(Shape shape, std::mt19937_64& rng) {
    Tensor<double> t(std::move(shape));
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& v : t.data()) v = n(rng);
    return t;
}

inline std::vector<sim::Observation> noise_observations(std::size_t n, std::size_t size, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> px(0, 255);
    std::vector<sim::Observation> out(n);
    for (auto& o : out) {
        o.visual = sim::Image(size, size);
        o.tactile = sim::Image(size, size);
        for (auto& p : o.visual.pixels) p = static_cast<std::uint8_t>(px(rng));
        for (auto& p : o.tactile.pixels) p = static_cast<std::uint8_t>(px(rng));
    }
    return out;
}

template <typename LossFn>
CheckResult grad_result(const std::string& name, LossFn&& loss, const ParamRefs<double>& ps, double tol) {
    const auto report = grad_check(loss, ps, tol, 1e-5);
    std::ostringstream os;
    os << "max rel. error " << report.max_rel_error << " (< " << tol << ")";
    return {name, report.ok() && report.max_rel_error < tol, report.ok() ? os.str() : report.summary()};
}

}  // namespace detail

/// Finite-difference checks of the layers and the contrastive pipeline in double precision.
inline std::vector<CheckResult> gradient_checks() {
    using detail::gaussian;
    std::vector<CheckResult> out;
    std::mt19937_64 rng(2024);

    Linear<double> fc("fc", 4, 3, rng);
    const auto x = gaussian({5, 4}, rng);
    out.push_back(detail::grad_result(
        "affine", [&](Tape<double>& t) { return ops::sum(t, ops::square(t, fc(t, t.constant(x), Binding::trainable))); },
        params_of<double>(fc), 1e-4));

    Conv2d<double> conv("conv", 1, 3, 3, 2, rng);
    const auto img = gaussian({2, 1, 9, 9}, rng);
    out.push_back(detail::grad_result(
        "conv2d", [&](Tape<double>& t) { return ops::sum(t, ops::tanh(t, conv(t, t.constant(img), Binding::trainable))); },
        params_of<double>(conv), 1e-4));

    Parameter<double> r("relu_in", gaussian({4, 6}, rng));
    for (auto& v : r.value.data())
        if (std::abs(v) < 0.05) v += 0.1;  // keep finite differences away from the kink
    const auto w = gaussian({4, 6}, rng);
    out.push_back(detail::grad_result(
        "relu", [&](Tape<double>& t) { return ops::sum(t, ops::mul(t, ops::relu(t, t.param(r)), t.constant(w))); },
        {&r}, 1e-4));

    repr::Head<double> head("head", 4, 6, rng);
    const auto z = gaussian({3, 4}, rng), hw = gaussian({3, 4}, rng);
    out.push_back(detail::grad_result(
        "head",
        [&](Tape<double>& t) { return ops::sum(t, ops::mul(t, head(t, t.constant(z), Binding::trainable), t.constant(hw))); },
        params_of<double>(head), 1e-4));

    repr::Encoder<double> enc("enc", 11, 3, rng);
    std::uniform_real_distribution<double> u(0, 1);
    Tensor<double> pix(Shape{2, 1, 11, 11});
    for (auto& v : pix.data()) v = u(rng);
    const auto ew = gaussian({2, 3}, rng);
    out.push_back(detail::grad_result(
        "encoder",
        [&](Tape<double>& t) { return ops::sum(t, ops::mul(t, enc(t, t.constant(pix), Binding::trainable), t.constant(ew))); },
        params_of<double>(enc), 1e-3));

    repr::ContrastiveConfig cfg;
    cfg.crop_size = 9;
    cfg.embed_dim = 4;
    cfg.head_hidden = 6;
    repr::RepresentationModel<double> model(cfg, rng);
    const auto obs = detail::noise_observations(4, 12, rng);
    repr::ObsBatch batch;
    for (const auto& o : obs) batch.push_back(&o);
    const auto aug = repr::augment_pair<double>(batch, cfg.crop_size, rng);
    // Keys are a stop-gradient path; freeze them so finite differences only move the query side.
    repr::RepresentationModel<double> frozen = model;
    out.push_back(detail::grad_result(
        "augment-encode-head-L_MM",
        [&](Tape<double>& t) { return repr::combined_loss(t, model, aug, cfg, &frozen).total; },
        model.trainable_params(), 1e-3));
    return out;
}

/// InfoNCE against a softmax written out in plain loops, and the combined-loss sum identity.
inline std::vector<CheckResult> loss_oracle_checks() {
    std::vector<CheckResult> out;
    std::mt19937_64 rng(77);
    double worst = 0.0;
    for (std::size_t B : {2, 4, 8, 16})
        for (std::size_t d : {2, 8, 50}) {
            const auto q = repr::CodeBatch<double>::normalized(detail::gaussian({B, d}, rng));
            const auto k = repr::CodeBatch<double>::normalized(detail::gaussian({B, d}, rng));
            double loss = 0.0;
            for (std::size_t i = 0; i < B; ++i) {
                std::vector<double> logits(B);
                for (std::size_t j = 0; j < B; ++j) {
                    for (std::size_t c = 0; c < d; ++c) logits[j] += q.codes.at(i, c) * k.codes.at(j, c) / 0.1;
                }
                double denom = 0.0;
                for (double l : logits) denom += std::exp(l);
                loss -= std::log(std::exp(logits[i]) / denom);
            }
            worst = std::max(worst, std::abs(repr::info_nce(q, k, 0.1) - loss / static_cast<double>(B)));
        }
    out.push_back({"info_nce vs softmax loops", worst < 1e-6, "max abs diff " + std::to_string(worst)});

    repr::ContrastiveConfig cfg;
    cfg.crop_size = 9;
    cfg.embed_dim = 4;
    cfg.head_hidden = 6;
    repr::RepresentationModel<double> model(cfg, rng);
    const auto obs = detail::noise_observations(6, 12, rng);
    repr::ObsBatch batch;
    for (const auto& o : obs) batch.push_back(&o);
    const auto aug = repr::augment_pair<double>(batch, cfg.crop_size, rng);
    Tape<double> tape;
    const auto c = repr::combined_loss(tape, model, aug, cfg).components;
    const double gap = std::abs(c.loss_mm - (c.loss_vv + c.loss_tt + c.loss_vt + c.loss_tv));
    out.push_back({"L_MM sum identity", gap < 1e-9, "gap " + std::to_string(gap)});
    return out;
}

/// Trains a tiny run twice and compares the metrics files byte for byte.
inline CheckResult determinism_check(const std::filesystem::path& scratch) {
    nlohmann::json j{{"env", "push_world"},
                     {"algorithm", "sac"},
                     {"seed", 3},
                     {"env_config", {{"image_size", 16}, {"horizon", 20}}},
                     {"contrastive", {{"crop_size", 12}, {"embed_dim", 8}, {"head_hidden", 16}}},
                     {"sac", {{"batch_size", 8}, {"hidden", 16}, {"init_steps", 20}}},
                     {"total_env_steps", 60},
                     {"eval_every", 30},
                     {"eval_episodes", 2}};
    auto read = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    std::string first;
    for (int k = 0; k < 2; ++k) {
        j["output_dir"] = (scratch / ("run" + std::to_string(k))).string();
        const auto res = run_experiment(parse_config(j));
        const std::string bytes = read(res.metrics_path);
        if (k == 0) first = bytes;
        else return {"train determinism", bytes == first && !bytes.empty(),
                     std::to_string(bytes.size()) + " bytes compared"};
    }
    return {};
}

}  // namespace m2curl::harness
