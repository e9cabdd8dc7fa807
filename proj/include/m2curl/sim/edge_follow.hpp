#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include "m2curl/sim/push_world.hpp"

namespace m2curl::sim {

/// A sensor sliding over a flat object whose straight edge passes through the
/// arena center at a random orientation. The object occupies the half-plane to
/// the right of the edge direction.
struct EdgeFollowState {
    Vec2 sensor;
    double edge_angle = 0.0;
    Vec2 edge_point;
    std::size_t step_count = 0;

    Vec2 edge_dir() const { return {std::cos(edge_angle), std::sin(edge_angle)}; }
    /// Unit normal pointing away from the object.
    Vec2 edge_normal() const { return perp(edge_dir()); }
    double lateral_offset() const { return dot(sensor - edge_point, edge_normal()); }
};

inline Polygon object_region(const EdgeFollowState& s, const Polygon& window) {
    return clip_half_plane(window, s.edge_point, s.edge_point - s.edge_dir());
}

inline Polygon sensor_contact_region(const EdgeFollowState& s, const EnvConfig& cfg) {
    Polygon p = object_region(s, square(s.sensor, cfg.pusher_half));
    if (p.size() < 3 || area(p) <= 0.0) p.clear();
    return p;
}

class EdgeFollow final : public Environment {
public:
    explicit EdgeFollow(EnvConfig cfg = {}) : cfg_(cfg) {}

    Observation reset(std::uint64_t seed) override {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        EdgeFollowState s;
        s.edge_angle = unit(rng) * 2.0 * std::numbers::pi;
        s.edge_point = {0.5 * cfg_.arena_size, 0.5 * cfg_.arena_size};
        s.sensor = s.edge_point - s.edge_dir() * (0.3 * cfg_.arena_size) +
                   s.edge_normal() * ((unit(rng) - 0.5) * 0.08);
        clamp_sensor(s);
        state_ = s;
        done_ = false;
        return observe();
    }

    StepResult step(Action action) override {
        if (done_) throw ContractError("EdgeFollow::step called after the episode finished");
        const Vec2 a{std::clamp(action[0], -1.0, 1.0), std::clamp(action[1], -1.0, 1.0)};
        state_.sensor += a * cfg_.pusher_speed;
        clamp_sensor(state_);
        ++state_.step_count;
        done_ = state_.step_count >= cfg_.horizon;

        StepResult r;
        const double offset = state_.lateral_offset();
        r.reward = -std::abs(offset) / cfg_.pusher_half;
        r.done = done_;
        r.observation = observe();
        const double contact = area(sensor_contact_region(state_, cfg_));
        r.info["lateral_offset"] = offset;
        r.info["progress"] = dot(state_.sensor - state_.edge_point, state_.edge_dir());
        r.info["contact"] = contact > 0.0 ? 1.0 : 0.0;
        r.info["contact_area"] = contact;
        return r;
    }

    std::size_t state_dim() const override { return 6; }
    EnvKind kind() const override { return EnvKind::edge_follow; }
    const EnvConfig& config() const override { return cfg_; }
    bool done() const override { return done_; }

    const EdgeFollowState& world() const { return state_; }
    void set_world(EdgeFollowState s) {
        state_ = s;
        done_ = state_.step_count >= cfg_.horizon;
    }

    Observation observe() const {
        const double A = cfg_.arena_size;
        const Viewport view{{0.5 * A, 0.5 * A}, 0.5 * A, cfg_.image_size};
        const Polygon arena = square({0.5 * A, 0.5 * A}, 0.5 * A);
        Image visual = render_scene(
            view, {}, {{object_region(state_, arena), 110.0}, {square(state_.sensor, cfg_.pusher_half), 255.0}});
        const Polygon local = translated(sensor_contact_region(state_, cfg_), state_.sensor * -1.0);
        Image tactile =
            render_imprint(local, cfg_.pusher_half * cfg_.tactile_fov_scale, cfg_.image_size, cfg_.tactile_blur_px);
        const Vec2 d = state_.edge_dir();
        return {std::move(visual), std::move(tactile),
                {state_.sensor.x, state_.sensor.y, d.x, d.y, state_.lateral_offset(),
                 dot(state_.sensor - state_.edge_point, d)}};
    }

private:
    void clamp_sensor(EdgeFollowState& s) const {
        const double h = cfg_.pusher_half, A = cfg_.arena_size;
        s.sensor.x = std::clamp(s.sensor.x, h, A - h);
        s.sensor.y = std::clamp(s.sensor.y, h, A - h);
    }

    EnvConfig cfg_;
    EdgeFollowState state_;
    bool done_ = true;
};

inline std::unique_ptr<Environment> make_environment(EnvKind kind, const EnvConfig& cfg = {}) {
    if (kind == EnvKind::push_world) return std::make_unique<PushWorld>(cfg);
    return std::make_unique<EdgeFollow>(cfg);
}

/// Builds the named environment and starts an episode.
inline std::pair<std::unique_ptr<Environment>, Observation> env_reset(const std::string& kind, std::uint64_t seed,
                                                                      const EnvConfig& cfg = {}) {
    auto env = make_environment(parse_env_kind(kind), cfg);
    Observation obs = env->reset(seed);
    return {std::move(env), std::move(obs)};
}

}  // namespace m2curl::sim
