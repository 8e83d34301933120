#pragma once

#include <array>
#include <cstddef>
#include <string>

#include "lfmdfn/lf/light_field.hpp"

namespace lfmdfn {

/// Rigid augmentation applied jointly to the angular and spatial planes.
/// Application order: rotate, then flip_h, then flip_v.
struct LfTransform {
    int rotation = 0;  // quarter turns, 0..3 (0, 90, 180, 270 degrees)
    bool flip_h = false;
    bool flip_v = false;

    bool operator==(const LfTransform&) const = default;
    std::string str() const {
        return "rot" + std::to_string(rotation * 90) + (flip_h ? "+fh" : "") + (flip_v ? "+fv" : "");
    }

    /// All 16 (rotation, flip_h, flip_v) combinations.
    static std::array<LfTransform, 16> all() {
        std::array<LfTransform, 16> out{};
        for (int i = 0; i < 16; ++i) out[i] = {i % 4, ((i / 4) & 1) != 0, ((i / 8) & 1) != 0};
        return out;
    }
};

/// Inverse element: reflections are involutions, pure rotations invert to
/// the opposite turn, and a double flip is a half turn.
inline LfTransform inverse(const LfTransform& t) {
    if (t.flip_h != t.flip_v) return t;
    const int rot = t.flip_h ? (t.rotation + 2) % 4 : t.rotation;
    return {(4 - rot) % 4, false, false};
}

namespace detail {

// 90 degrees: (u,v,x,y) -> (v, U-1-u, y, X-1-x).
inline LightField4D rotate90(const LightField4D& lf) {
    const auto& d = lf.dims();
    LightField4D out({d.V, d.U, d.Y, d.X, d.C});
    for (std::size_t u = 0; u < d.U; ++u)
        for (std::size_t v = 0; v < d.V; ++v)
            for (std::size_t x = 0; x < d.X; ++x)
                for (std::size_t y = 0; y < d.Y; ++y)
                    for (std::size_t c = 0; c < d.C; ++c)
                        out.at(v, d.U - 1 - u, y, d.X - 1 - x, c) = lf.at(u, v, x, y, c);
    return out;
}

// Horizontal: (u,v,x,y) -> (u, V-1-v, x, Y-1-y). Vertical: (u,v,x,y) -> (U-1-u, v, X-1-x, y).
inline LightField4D flip(const LightField4D& lf, bool horizontal) {
    const auto& d = lf.dims();
    LightField4D out(d);
    for (std::size_t u = 0; u < d.U; ++u)
        for (std::size_t v = 0; v < d.V; ++v)
            for (std::size_t x = 0; x < d.X; ++x)
                for (std::size_t y = 0; y < d.Y; ++y)
                    for (std::size_t c = 0; c < d.C; ++c) {
                        const float val = lf.at(u, v, x, y, c);
                        if (horizontal)
                            out.at(u, d.V - 1 - v, x, d.Y - 1 - y, c) = val;
                        else
                            out.at(d.U - 1 - u, v, d.X - 1 - x, y, c) = val;
                    }
    return out;
}

}  // namespace detail

inline LightField4D apply_transform(const LightField4D& lf, const LfTransform& t) {
    if (t.rotation < 0 || t.rotation > 3) throw std::invalid_argument("rotation must be 0..3 quarter turns");
    if (t.rotation % 2 == 1 && lf.U() != lf.V())
        throw ShapeError("90/270 degree rotation needs a square angular grid, got " + std::to_string(lf.U()) + "x" +
                         std::to_string(lf.V()));
    LightField4D out = lf;
    for (int i = 0; i < t.rotation; ++i) out = detail::rotate90(out);
    if (t.flip_h) out = detail::flip(out, true);
    if (t.flip_v) out = detail::flip(out, false);
    return out;
}

}  // namespace lfmdfn
