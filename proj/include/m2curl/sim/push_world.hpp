#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "m2curl/sim/environment.hpp"

namespace m2curl::sim {

/// World state of the push task: an axis-aligned square pusher (carrying the
/// tactile sensor on its faces) and a rotated square block that must track a
/// piecewise-linear waypoint path.
struct PushWorldState {
    Vec2 pusher;
    Vec2 block;
    double block_angle = 0.0;
    std::vector<Vec2> waypoints;
    std::size_t waypoint_index = 0;
    std::size_t step_count = 0;
};

inline Polygon pusher_polygon(const PushWorldState& s, const EnvConfig& cfg) {
    return square(s.pusher, cfg.pusher_half);
}

inline Polygon block_polygon(const PushWorldState& s, const EnvConfig& cfg) {
    return square(s.block, cfg.block_half, s.block_angle);
}

/// Pusher-block overlap in world coordinates; empty when not in contact.
inline Polygon contact_region(const PushWorldState& s, const EnvConfig& cfg) {
    return intersect(block_polygon(s, cfg), pusher_polygon(s, cfg));
}

/// Gaussian-blurred overlap patch in the pusher's frame.
inline Image render_tactile(const PushWorldState& s, const EnvConfig& cfg) {
    const Polygon local = translated(contact_region(s, cfg), s.pusher * -1.0);
    return render_imprint(local, cfg.pusher_half * cfg.tactile_fov_scale, cfg.image_size,
                          cfg.tactile_blur_px);
}

inline Image render_visual(const PushWorldState& s, const EnvConfig& cfg, bool show_waypoint = true) {
    const Viewport view{{0.5 * cfg.arena_size, 0.5 * cfg.arena_size}, 0.5 * cfg.arena_size, cfg.image_size};
    std::vector<DrawDisc> discs;
    if (show_waypoint && !s.waypoints.empty()) {
        discs.push_back({s.waypoints[s.waypoint_index], cfg.waypoint_radius, 90.0});
    }
    return render_scene(view, discs,
                        {{block_polygon(s, cfg), 170.0}, {pusher_polygon(s, cfg), 255.0}});
}

inline std::vector<double> push_world_state_vector(const PushWorldState& s) {
    const Vec2 wp = s.waypoints.empty() ? s.block : s.waypoints[s.waypoint_index];
    return {s.pusher.x,
            s.pusher.y,
            s.block.x,
            s.block.y,
            wp.x,
            wp.y,
            std::cos(4.0 * s.block_angle),
            std::sin(4.0 * s.block_angle),
            s.block.x - s.pusher.x,
            s.block.y - s.pusher.y,
            wp.x - s.block.x,
            wp.y - s.block.y};
}

class PushWorld final : public Environment {
public:
    explicit PushWorld(EnvConfig cfg = {}) : cfg_(cfg) {}

    Observation reset(std::uint64_t seed) override {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double A = cfg_.arena_size;
        PushWorldState s;
        s.block_angle = unit(rng) * 0.5 * std::numbers::pi;
        s.block = {A * (0.35 + 0.3 * unit(rng)), A * (0.35 + 0.3 * unit(rng))};
        double heading = unit(rng) * 2.0 * std::numbers::pi;
        const Vec2 first_dir{std::cos(heading), std::sin(heading)};
        Vec2 prev = s.block;
        for (std::size_t k = 0; k < cfg_.waypoint_count; ++k) {
            if (k > 0) heading += (unit(rng) - 0.5) * 2.0 * std::numbers::pi / 3.0;
            Vec2 w = prev + Vec2{std::cos(heading), std::sin(heading)} * cfg_.waypoint_spacing;
            w.x = std::clamp(w.x, 0.1 * A, 0.9 * A);
            w.y = std::clamp(w.y, 0.1 * A, 0.9 * A);
            s.waypoints.push_back(w);
            prev = w;
        }
        const double gap = 0.02 + 0.04 * unit(rng);
        const double lateral = (unit(rng) - 0.5) * 0.06;
        const double dist = std::numbers::sqrt2 * (cfg_.pusher_half + cfg_.block_half) + gap;
        s.pusher = s.block - first_dir * dist + perp(first_dir) * lateral;
        clamp_pusher(s);
        if (!contact_region(s, cfg_).empty()) {
            s.pusher = s.block + first_dir * dist;
            clamp_pusher(s);
        }
        state_ = std::move(s);
        done_ = false;
        return observe();
    }

    StepResult step(Action action) override {
        if (done_) throw ContractError("PushWorld::step called after the episode finished");
        const Vec2 a{std::clamp(action[0], -1.0, 1.0), std::clamp(action[1], -1.0, 1.0)};
        state_.pusher += a * cfg_.pusher_speed;
        clamp_pusher(state_);
        resolve_contact();

        StepResult r;
        const Vec2 wp = state_.waypoints[state_.waypoint_index];
        const double dist = norm(state_.block - wp);
        r.reward = -dist / (std::numbers::sqrt2 * cfg_.arena_size);
        r.info["distance"] = dist;
        r.info["waypoint_index"] = static_cast<double>(state_.waypoint_index);
        if (dist < cfg_.waypoint_radius && state_.waypoint_index + 1 < state_.waypoints.size()) {
            ++state_.waypoint_index;
        }
        ++state_.step_count;
        done_ = state_.step_count >= cfg_.horizon;
        r.done = done_;
        r.observation = observe();
        const double contact = area(contact_region(state_, cfg_));
        r.info["contact"] = contact > 0.0 ? 1.0 : 0.0;
        r.info["contact_area"] = contact;
        return r;
    }

    std::size_t state_dim() const override { return 12; }
    EnvKind kind() const override { return EnvKind::push_world; }
    const EnvConfig& config() const override { return cfg_; }
    bool done() const override { return done_; }

    const PushWorldState& world() const { return state_; }

    /// Replaces the world state (tests and dataset generation).
    void set_world(PushWorldState s) {
        state_ = std::move(s);
        done_ = state_.step_count >= cfg_.horizon;
    }

    Observation observe() const {
        return {render_visual(state_, cfg_), render_tactile(state_, cfg_), push_world_state_vector(state_)};
    }

private:
    void clamp_pusher(PushWorldState& s) const {
        const double h = cfg_.pusher_half, A = cfg_.arena_size;
        s.pusher.x = std::clamp(s.pusher.x, h, A - h);
        s.pusher.y = std::clamp(s.pusher.y, h, A - h);
    }

    void clamp_block(PushWorldState& s) const {
        const double r = cfg_.block_half * std::numbers::sqrt2, A = cfg_.arena_size;
        s.block.x = std::clamp(s.block.x, r, A - r);
        s.block.y = std::clamp(s.block.y, r, A - r);
    }

    // Quasi-static push: the block slides along the contact normal until only
    // the residual sensor indentation remains. If the arena wall stops the
    // block, the pusher is backed out instead.
    void resolve_contact() {
        const double keep = cfg_.contact_depth;
        auto pen = penetration(pusher_polygon(state_, cfg_), block_polygon(state_, cfg_));
        if (!pen || pen->depth <= keep) return;
        state_.block += pen->normal * (pen->depth - keep);
        clamp_block(state_);
        pen = penetration(pusher_polygon(state_, cfg_), block_polygon(state_, cfg_));
        if (pen && pen->depth > keep) {
            state_.pusher += pen->normal * -(pen->depth - keep);
            clamp_pusher(state_);
        }
    }

    EnvConfig cfg_;
    PushWorldState state_;
    bool done_ = true;
};

}  // namespace m2curl::sim
