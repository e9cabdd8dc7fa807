#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "m2curl/sim/push_world.hpp"

namespace m2curl::sim {

/// Visual/tactile image pairs rendered from shared pusher-block contact poses.
struct LatentPairDataset {
    std::size_t height = 0;
    std::size_t width = 0;
    std::uint64_t seed = 0;
    std::vector<Image> visual;
    std::vector<Image> tactile;
    std::vector<PushWorldState> poses;

    std::size_t size() const { return visual.size(); }
};

/// Samples a pose with the block pressed against one of the four pusher faces.
/// The pusher sits at the arena center; face, lateral offset, indentation depth
/// and block orientation vary.
template <typename Rng>
PushWorldState sample_contact_pose(Rng& rng, const EnvConfig& cfg) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> face_dist(0, 3);
    const Vec2 normals[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    for (;;) {
        PushWorldState s;
        s.pusher = {0.5 * cfg.arena_size, 0.5 * cfg.arena_size};
        const Vec2 n = normals[face_dist(rng)];
        s.block_angle = unit(rng) * 0.5 * std::numbers::pi;
        const double extent = cfg.block_half * (std::abs(std::cos(s.block_angle)) + std::abs(std::sin(s.block_angle)));
        const double reach = cfg.pusher_half + 0.5 * cfg.block_half;
        const double lateral = (2.0 * unit(rng) - 1.0) * reach;
        const double depth = 0.002 + unit(rng) * (1.5 * cfg.contact_depth - 0.002);
        s.block = s.pusher + n * (cfg.pusher_half + extent - depth) + perp(n) * lateral;
        if (area(contact_region(s, cfg)) > 0.0) return s;
    }
}

inline LatentPairDataset make_latent_pair_dataset(std::size_t n, std::uint64_t seed, const EnvConfig& cfg = {}) {
    if (n < 2) throw ConfigError("latent pair dataset needs n >= 2 (contrastive losses need negatives)");
    std::mt19937_64 rng(seed);
    LatentPairDataset ds;
    ds.height = ds.width = cfg.image_size;
    ds.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        PushWorldState s = sample_contact_pose(rng, cfg);
        ds.visual.push_back(render_visual(s, cfg, false));
        ds.tactile.push_back(render_tactile(s, cfg));
        ds.poses.push_back(std::move(s));
    }
    return ds;
}

/// Binary layout: one line of JSON header {format, n, height, width, seed}
/// terminated by '\n', then n blocks of visual bytes followed by tactile bytes.
inline void save_latent_pairs(const LatentPairDataset& ds, const std::filesystem::path& path) {
    nlohmann::json header{{"format", "m2curl-latent-pairs"},
                          {"n", ds.size()},
                          {"height", ds.height},
                          {"width", ds.width},
                          {"seed", ds.seed}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << header.dump() << '\n';
    for (std::size_t i = 0; i < ds.size(); ++i) {
        out.write(reinterpret_cast<const char*>(ds.visual[i].pixels.data()),
                  static_cast<std::streamsize>(ds.visual[i].pixels.size()));
        out.write(reinterpret_cast<const char*>(ds.tactile[i].pixels.data()),
                  static_cast<std::streamsize>(ds.tactile[i].pixels.size()));
    }
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

inline LatentPairDataset load_latent_pairs(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad latent pair header: ") + e.what());
    }
    if (header.value("format", "") != "m2curl-latent-pairs") throw ParseError("not a latent pair file");
    LatentPairDataset ds;
    const auto n = header.at("n").get<std::size_t>();
    ds.height = header.at("height").get<std::size_t>();
    ds.width = header.at("width").get<std::size_t>();
    ds.seed = header.at("seed").get<std::uint64_t>();
    for (std::size_t i = 0; i < n; ++i) {
        Image v(ds.height, ds.width), t(ds.height, ds.width);
        in.read(reinterpret_cast<char*>(v.pixels.data()), static_cast<std::streamsize>(v.pixels.size()));
        in.read(reinterpret_cast<char*>(t.pixels.data()), static_cast<std::streamsize>(t.pixels.size()));
        if (!in) throw ParseError("latent pair file truncated at pair " + std::to_string(i));
        ds.visual.push_back(std::move(v));
        ds.tactile.push_back(std::move(t));
    }
    return ds;
}

}  // namespace m2curl::sim
