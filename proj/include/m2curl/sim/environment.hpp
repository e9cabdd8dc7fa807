#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "m2curl/errors.hpp"
#include "m2curl/sim/render.hpp"

namespace m2curl::sim {

/// Paired visual and tactile images plus the ground-truth state vector.
struct Observation {
    Image visual;
    Image tactile;
    std::vector<double> state;

    friend bool operator==(const Observation&, const Observation&) = default;
};

using Action = std::array<double, 2>;

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
    std::map<std::string, double> info;
};

enum class EnvKind { push_world, edge_follow };

inline EnvKind parse_env_kind(const std::string& name) {
    if (name == "push_world") return EnvKind::push_world;
    if (name == "edge_follow") return EnvKind::edge_follow;
    throw ConfigError("unknown env kind '" + name + "' (expected push_world or edge_follow)");
}

inline std::string to_string(EnvKind kind) {
    return kind == EnvKind::push_world ? "push_world" : "edge_follow";
}

/// Physical and rendering constants shared by both environments.
struct EnvConfig {
    std::size_t image_size = 64;
    std::size_t horizon = 200;
    double arena_size = 1.0;
    double pusher_speed = 0.02;
    double pusher_half = 0.06;
    double block_half = 0.08;
    /// Residual indentation kept after a push resolves; the sensor "gel" depth.
    double contact_depth = 0.008;
    std::size_t waypoint_count = 4;
    double waypoint_spacing = 0.15;
    double waypoint_radius = 0.04;
    /// Tactile field of view as a multiple of the sensor half-width.
    double tactile_fov_scale = 1.6;
    double tactile_blur_px = 1.0;
};

class Environment {
public:
    virtual ~Environment() = default;

    /// Starts a new episode drawn deterministically from `seed`.
    virtual Observation reset(std::uint64_t seed) = 0;

    /// Advances one step; actions are clipped to [-1, 1]. Stepping a finished
    /// episode is a contract error.
    virtual StepResult step(Action action) = 0;

    virtual std::size_t state_dim() const = 0;
    virtual EnvKind kind() const = 0;
    virtual const EnvConfig& config() const = 0;
    virtual bool done() const = 0;
};

}  // namespace m2curl::sim
