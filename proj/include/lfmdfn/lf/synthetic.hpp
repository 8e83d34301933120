#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "lfmdfn/lf/light_field.hpp"

namespace lfmdfn {

/// Procedural Lambertian scene: a textured background plane and a stack of
/// textured shapes, each fronto-parallel at its own disparity. Views are
/// rendered with 4x4 supersampling so edges are antialiased.
struct SceneOptions {
    std::size_t U = 7, V = 7, X = 48, Y = 48, C = 1;
    std::size_t shapes = 6;
    double max_disparity = 1.5;  // pixels per view step
    std::uint64_t seed = 1;
};

namespace detail {

struct Texture {
    std::array<double, 3> base{}, amp{};
    double fx = 0, fy = 0, phase = 0;
    double checker = 0;  // checker period in pixels, 0 = none

    double value(double x, double y, std::size_t c) const {
        double v = base[c] + amp[c] * std::sin(fx * x + fy * y + phase);
        if (checker > 0) {
            const long cx = static_cast<long>(std::floor(x / checker)), cy = static_cast<long>(std::floor(y / checker));
            if ((cx + cy) % 2 != 0) v *= 0.6;
        }
        return v;
    }
};

struct Shape {
    bool disc = true;
    double cx = 0, cy = 0, rx = 0, ry = 0, disparity = 0;
    Texture tex;

    bool contains(double x, double y) const {
        const double dx = (x - cx) / rx, dy = (y - cy) / ry;
        return disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
    }
};

inline Texture random_texture(std::mt19937_64& rng, std::size_t channels) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Texture t;
    const double b = 0.2 + 0.6 * unit(rng);
    for (std::size_t c = 0; c < 3; ++c) {
        t.base[c] = channels == 1 ? b : 0.2 + 0.6 * unit(rng);
        t.amp[c] = 0.05 + 0.15 * unit(rng);
    }
    const double freq = 0.2 + 1.2 * unit(rng), ang = std::numbers::pi * unit(rng);
    t.fx = freq * std::cos(ang);
    t.fy = freq * std::sin(ang);
    t.phase = 2 * std::numbers::pi * unit(rng);
    t.checker = unit(rng) < 0.4 ? 2.0 + 6.0 * unit(rng) : 0.0;
    return t;
}

}  // namespace detail

/// Renders a synthetic light field with values in [0,1].
inline LightField4D synthesize_lf(const SceneOptions& opt) {
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double X = static_cast<double>(opt.X), Y = static_cast<double>(opt.Y);

    detail::Texture background = detail::random_texture(rng, opt.C);
    const double bg_disp = opt.max_disparity * (2 * unit(rng) - 1) * 0.5;
    std::vector<detail::Shape> shapes(opt.shapes);
    for (auto& s : shapes) {
        s.disc = unit(rng) < 0.5;
        s.cx = X * unit(rng);
        s.cy = Y * unit(rng);
        s.rx = (0.08 + 0.22 * unit(rng)) * X;
        s.ry = (0.08 + 0.22 * unit(rng)) * Y;
        s.disparity = opt.max_disparity * (2 * unit(rng) - 1);
        s.tex = detail::random_texture(rng, opt.C);
    }
    // Nearer shapes (larger disparity) occlude farther ones.
    std::sort(shapes.begin(), shapes.end(), [](const auto& a, const auto& b) { return a.disparity < b.disparity; });

    LightField4D lf({opt.U, opt.V, opt.X, opt.Y, opt.C});
    const double uc = (static_cast<double>(opt.U) - 1) / 2, vc = (static_cast<double>(opt.V) - 1) / 2;
    constexpr int ss = 4;
    for (std::size_t u = 0; u < opt.U; ++u)
        for (std::size_t v = 0; v < opt.V; ++v) {
            const double du = static_cast<double>(u) - uc, dv = static_cast<double>(v) - vc;
            for (std::size_t x = 0; x < opt.X; ++x)
                for (std::size_t y = 0; y < opt.Y; ++y)
                    for (std::size_t c = 0; c < opt.C; ++c) {
                        double acc = 0;
                        for (int sx = 0; sx < ss; ++sx)
                            for (int sy = 0; sy < ss; ++sy) {
                                const double px = static_cast<double>(x) + (sx + 0.5) / ss;
                                const double py = static_cast<double>(y) + (sy + 0.5) / ss;
                                double val = background.value(px + bg_disp * du, py + bg_disp * dv, c);
                                for (const auto& s : shapes) {
                                    const double qx = px + s.disparity * du, qy = py + s.disparity * dv;
                                    if (s.contains(qx, qy)) val = s.tex.value(qx, qy, c);
                                }
                                acc += val;
                            }
                        lf.at(u, v, x, y, c) = static_cast<float>(std::clamp(acc / (ss * ss), 0.0, 1.0));
                    }
        }
    return lf;
}

}  // namespace lfmdfn
