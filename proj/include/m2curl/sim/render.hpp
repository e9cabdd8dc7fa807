#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "m2curl/sim/geometry.hpp"

namespace m2curl::sim {

/// Single-channel 8-bit image, row-major, row 0 at the top.
struct Image {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0) {}

    std::uint8_t& at(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
    std::uint8_t at(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

    bool all_zero() const {
        return std::all_of(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v == 0; });
    }

    long total_intensity() const {
        long s = 0;
        for (auto v : pixels) s += v;
        return s;
    }

    friend bool operator==(const Image&, const Image&) = default;
};

/// Axis-aligned square window of the plane mapped onto a square pixel grid.
struct Viewport {
    Vec2 center;
    double half_extent = 0.5;
    std::size_t size = 64;

    double pixel_size() const { return 2.0 * half_extent / static_cast<double>(size); }

    /// Plane coordinates of the center of pixel (row, col).
    Vec2 pixel_center(double row, double col) const {
        const double ps = pixel_size();
        return {center.x - half_extent + (col + 0.5) * ps, center.y + half_extent - (row + 0.5) * ps};
    }

    /// Fractional (row, col) of a plane point; inverse of pixel_center.
    Vec2 to_pixel(Vec2 p) const {
        const double ps = pixel_size();
        return {(center.y + half_extent - p.y) / ps - 0.5, (p.x - (center.x - half_extent)) / ps - 0.5};
    }
};

struct DrawPolygon {
    Polygon shape;
    double intensity = 255.0;
};

struct DrawDisc {
    Vec2 center;
    double radius = 0.0;
    double intensity = 255.0;
};

/// Flat-shaded top-down scene: discs first, then polygons in order (later ones
/// paint over earlier ones), 2x2 supersampled.
inline Image render_scene(const Viewport& view, const std::vector<DrawDisc>& discs,
                          const std::vector<DrawPolygon>& polys, double background = 0.0) {
    Image img(view.size, view.size);
    constexpr double offs[2] = {-0.25, 0.25};
    for (std::size_t r = 0; r < view.size; ++r) {
        for (std::size_t c = 0; c < view.size; ++c) {
            double acc = 0.0;
            for (double dr : offs) {
                for (double dc : offs) {
                    const Vec2 p = view.pixel_center(static_cast<double>(r) + dr, static_cast<double>(c) + dc);
                    double v = background;
                    for (const auto& d : discs) {
                        if (norm(p - d.center) <= d.radius) v = d.intensity;
                    }
                    for (const auto& poly : polys) {
                        if (contains(poly.shape, p)) v = poly.intensity;
                    }
                    acc += v;
                }
            }
            img.at(r, c) = static_cast<std::uint8_t>(std::clamp(std::lround(acc / 4.0), 0L, 255L));
        }
    }
    return img;
}

/// Fraction of each pixel covered by `region`, exact up to floating point.
inline std::vector<double> coverage(const Viewport& view, const Polygon& region) {
    std::vector<double> cov(view.size * view.size, 0.0);
    if (region.size() < 3) return cov;
    double rmin = 1e300, rmax = -1e300, cmin = 1e300, cmax = -1e300;
    for (auto v : region) {
        const Vec2 rc = view.to_pixel(v);
        rmin = std::min(rmin, rc.x);
        rmax = std::max(rmax, rc.x);
        cmin = std::min(cmin, rc.y);
        cmax = std::max(cmax, rc.y);
    }
    const auto lo = [&](double v) {
        return static_cast<std::size_t>(std::clamp(std::floor(v + 0.5), 0.0, double(view.size - 1)));
    };
    const double ps = view.pixel_size();
    const double pixel_area = ps * ps;
    for (std::size_t r = lo(rmin); r <= lo(rmax); ++r) {
        for (std::size_t c = lo(cmin); c <= lo(cmax); ++c) {
            const Vec2 pc = view.pixel_center(static_cast<double>(r), static_cast<double>(c));
            const Polygon cell = square(pc, 0.5 * ps);
            const double a = area(intersect(region, cell));
            cov[r * view.size + c] = std::min(1.0, a / pixel_area);
        }
    }
    return cov;
}

/// Separable Gaussian blur with zero padding.
inline std::vector<double> gaussian_blur(const std::vector<double>& src, std::size_t size, double sigma) {
    if (sigma <= 0.0) return src;
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        ksum += kernel[i + radius];
    }
    for (auto& k : kernel) k /= ksum;
    const int n = static_cast<int>(size);
    std::vector<double> tmp(src.size(), 0.0), out(src.size(), 0.0);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            double s = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int cc = c + k;
                if (cc >= 0 && cc < n) s += kernel[k + radius] * src[r * n + cc];
            }
            tmp[r * n + c] = s;
        }
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            double s = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int rr = r + k;
                if (rr >= 0 && rr < n) s += kernel[k + radius] * tmp[rr * n + c];
            }
            out[r * n + c] = s;
        }
    return out;
}

/// Tactile imprint: blurred coverage of the contact region, expressed in the
/// sensor frame. Any pixel with positive blurred coverage is at least 1, so
/// the image is all-zero exactly when the contact region is empty.
inline Image render_imprint(const Polygon& contact_in_sensor_frame, double fov_half, std::size_t size,
                            double blur_sigma_px) {
    Image img(size, size);
    if (contact_in_sensor_frame.size() < 3) return img;
    const Viewport view{{0.0, 0.0}, fov_half, size};
    const auto blurred = gaussian_blur(coverage(view, contact_in_sensor_frame), size, blur_sigma_px);
    for (std::size_t i = 0; i < blurred.size(); ++i) {
        const double v = blurred[i];
        img.pixels[i] = v > 0.0 ? static_cast<std::uint8_t>(std::min(255.0, std::ceil(255.0 * v))) : 0;
    }
    return img;
}

}  // namespace m2curl::sim
