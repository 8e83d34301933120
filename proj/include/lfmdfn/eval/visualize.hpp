#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "lfmdfn/lf/light_field.hpp"
#include "lfmdfn/model/mdfn.hpp"

namespace lfmdfn::eval {

/// The r*r dynamic filters that synthesize the sub-pixels of LR pixel (x,y)
/// in view (u,v). Entry [dx*r+dy][i*d+j] is tap (i,j) of sub-pixel (dx,dy).
struct FilterGroup {
    std::size_t u = 0, v = 0, x = 0, y = 0, r = 0, d = 0;
    std::vector<std::vector<float>> tiles;
};

inline FilterGroup filter_group(const model::DynamicFilterField& f, std::size_t r, std::size_t u, std::size_t v,
                                std::size_t x, std::size_t y) {
    if (u >= f.U || v >= f.V) throw RangeError("view (" + std::to_string(u) + "," + std::to_string(v) + ") outside the " +
                                               std::to_string(f.U) + "x" + std::to_string(f.V) + " angular grid");
    if (r == 0 || x * r >= f.RX || y * r >= f.RY)
        throw RangeError("pixel (" + std::to_string(x) + "," + std::to_string(y) + ") outside the " +
                         std::to_string(f.RX / std::max<std::size_t>(r, 1)) + "x" +
                         std::to_string(f.RY / std::max<std::size_t>(r, 1)) + " LR image");
    FilterGroup g{u, v, x, y, r, f.d, {}};
    for (std::size_t dx = 0; dx < r; ++dx)
        for (std::size_t dy = 0; dy < r; ++dy) {
            std::vector<float> tile(f.d * f.d);
            for (std::size_t i = 0; i < f.d; ++i)
                for (std::size_t j = 0; j < f.d; ++j) tile[i * f.d + j] = f.at(u, v, x * r + dx, y * r + dy, i, j);
            g.tiles.push_back(std::move(tile));
        }
    return g;
}

inline nlohmann::json to_json(const FilterGroup& g) {
    nlohmann::json j;
    j["view"] = {g.u, g.v};
    j["pixel"] = {g.x, g.y};
    j["r"] = g.r;
    j["d"] = g.d;
    j["tap_order"] = "row-major (i over u, j over v)";
    j["tiles"] = nlohmann::json::array();
    for (std::size_t k = 0; k < g.tiles.size(); ++k) {
        double sum = 0;
        for (float w : g.tiles[k]) sum += w;
        j["tiles"].push_back({{"subpixel", {k / g.r, k % g.r}}, {"taps", g.tiles[k]}, {"sum", sum}});
    }
    return j;
}

// Piecewise-linear black-red-yellow-white ramp.
inline std::array<float, 3> heat_color(float t) {
    t = std::clamp(t, 0.0f, 1.0f);
    return {std::min(1.0f, 3 * t), std::clamp(3 * t - 1, 0.0f, 1.0f), std::clamp(3 * t - 2, 0.0f, 1.0f)};
}

/// r x r tiles of d x d cells, `cell` pixels per tap, one-pixel gray gutters,
/// all tiles on one shared color scale (min..max over the group).
inline Image2D render_filter_grid(const FilterGroup& g, std::size_t cell = 16) {
    float lo = 1e30f, hi = -1e30f;
    for (const auto& t : g.tiles)
        for (float w : t) {
            lo = std::min(lo, w);
            hi = std::max(hi, w);
        }
    const float span = hi > lo ? hi - lo : 1.0f;
    const std::size_t tile = g.d * cell, side = g.r * tile + (g.r + 1);
    Image2D img(side, side, 3);
    std::fill(img.data.begin(), img.data.end(), 0.5f);
    for (std::size_t k = 0; k < g.tiles.size(); ++k) {
        const std::size_t r0 = 1 + (k / g.r) * (tile + 1), c0 = 1 + (k % g.r) * (tile + 1);
        for (std::size_t i = 0; i < g.d; ++i)
            for (std::size_t j = 0; j < g.d; ++j) {
                const auto rgb = heat_color(hi > lo ? (g.tiles[k][i * g.d + j] - lo) / span : 0.5f);
                for (std::size_t a = 0; a < cell; ++a)
                    for (std::size_t b = 0; b < cell; ++b)
                        for (std::size_t c = 0; c < 3; ++c) img.at(r0 + i * cell + a, c0 + j * cell + b, c) = rgb[c];
            }
    }
    return img;
}

/// EPI magnified by `angular_scale` along its angular (row) axis by pixel
/// replication; with `normalize`, intensities are stretched to [0,1].
inline Image2D epi_image(const LightField4D& lf, PlaneKind kind, std::size_t a, std::size_t b, std::size_t angular_scale,
                         bool normalize) {
    if (angular_scale == 0) throw std::invalid_argument("EPI scale must be >= 1");
    const Image2D epi = view_epi(lf, kind, a, b);
    Image2D out(epi.rows * angular_scale, epi.cols, epi.channels);
    float lo = 0.0f, hi = 1.0f;
    if (normalize && !epi.data.empty()) {
        const auto [mn, mx] = std::minmax_element(epi.data.begin(), epi.data.end());
        lo = *mn;
        hi = *mx > *mn ? *mx : *mn + 1.0f;
    }
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c)
            for (std::size_t ch = 0; ch < out.channels; ++ch)
                out.at(r, c, ch) = (epi.at(r / angular_scale, c, ch) - lo) / (hi - lo);
    return out;
}

}  // namespace lfmdfn::eval
