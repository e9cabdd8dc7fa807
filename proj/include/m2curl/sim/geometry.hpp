#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace m2curl::sim {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2& operator+=(Vec2 o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    friend bool operator==(Vec2, Vec2) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline Vec2 perp(Vec2 a) { return {-a.y, a.x}; }

/// Convex polygon, counter-clockwise vertex order.
using Polygon = std::vector<Vec2>;

inline Polygon square(Vec2 center, double half, double angle = 0.0) {
    const double c = std::cos(angle), s = std::sin(angle);
    Polygon p;
    for (auto [lx, ly] : {std::pair{-half, -half}, {half, -half}, {half, half}, {-half, half}}) {
        p.push_back({center.x + c * lx - s * ly, center.y + s * lx + c * ly});
    }
    return p;
}

inline Polygon translated(const Polygon& poly, Vec2 offset) {
    Polygon out = poly;
    for (auto& v : out) v += offset;
    return out;
}

inline double area(const Polygon& poly) {
    if (poly.size() < 3) return 0.0;
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) a += cross(poly[i], poly[(i + 1) % poly.size()]);
    return std::abs(0.5 * a);
}

inline Vec2 centroid(const Polygon& poly) {
    double a = 0.0, cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 p = poly[i], q = poly[(i + 1) % poly.size()];
        const double c = cross(p, q);
        a += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    if (std::abs(a) < 1e-300) return poly.empty() ? Vec2{} : poly.front();
    return {cx / (3.0 * a), cy / (3.0 * a)};
}

/// Keeps the part of `subject` on the side of line a->b where cross(b-a, p-a) >= 0.
inline Polygon clip_half_plane(const Polygon& subject, Vec2 a, Vec2 b) {
    Polygon out;
    if (subject.empty()) return out;
    const Vec2 e = b - a;
    auto side = [&](Vec2 p) { return cross(e, p - a); };
    for (std::size_t i = 0; i < subject.size(); ++i) {
        const Vec2 cur = subject[i];
        const Vec2 nxt = subject[(i + 1) % subject.size()];
        const double sc = side(cur), sn = side(nxt);
        if (sc >= 0) out.push_back(cur);
        if ((sc >= 0) != (sn >= 0)) {
            const double t = sc / (sc - sn);
            out.push_back(cur + (nxt - cur) * t);
        }
    }
    return out;
}

/// Sutherland-Hodgman intersection of two convex polygons.
inline Polygon intersect(const Polygon& subject, const Polygon& clip) {
    Polygon out = subject;
    for (std::size_t i = 0; i < clip.size() && !out.empty(); ++i) {
        out = clip_half_plane(out, clip[i], clip[(i + 1) % clip.size()]);
    }
    if (out.size() < 3) out.clear();
    return out;
}

struct Penetration {
    double depth = 0.0;
    Vec2 normal;  // unit, pointing from the first polygon towards the second
};

/// Separating-axis test. Returns the minimum-translation penetration of two
/// convex polygons, or nothing when they are separated or only touching.
inline std::optional<Penetration> penetration(const Polygon& a, const Polygon& b) {
    Penetration best{std::numeric_limits<double>::infinity(), {}};
    auto test_axes = [&](const Polygon& poly) {
        for (std::size_t i = 0; i < poly.size(); ++i) {
            Vec2 edge = poly[(i + 1) % poly.size()] - poly[i];
            Vec2 axis = perp(edge) * (1.0 / norm(edge));
            double amin = 1e300, amax = -1e300, bmin = 1e300, bmax = -1e300;
            for (auto v : a) {
                amin = std::min(amin, dot(v, axis));
                amax = std::max(amax, dot(v, axis));
            }
            for (auto v : b) {
                bmin = std::min(bmin, dot(v, axis));
                bmax = std::max(bmax, dot(v, axis));
            }
            const double overlap = std::min(amax, bmax) - std::max(amin, bmin);
            if (overlap <= 0.0) return false;
            if (overlap < best.depth) {
                best.depth = overlap;
                const double ca = 0.5 * (amin + amax), cb = 0.5 * (bmin + bmax);
                best.normal = cb >= ca ? axis : axis * -1.0;
            }
        }
        return true;
    };
    if (!test_axes(a) || !test_axes(b)) return std::nullopt;
    return best;
}

inline bool contains(const Polygon& poly, Vec2 p) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
        if (cross(poly[(i + 1) % poly.size()] - poly[i], p - poly[i]) < 0) return false;
    }
    return true;
}

}  // namespace m2curl::sim
