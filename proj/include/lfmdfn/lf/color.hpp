#pragma once

#include <array>

#include "lfmdfn/lf/light_field.hpp"

// ITU-R BT.601 studio-swing YCbCr on [0,1] data:
//   Y  in [16/255, 235/255], Cb/Cr in [16/255, 240/255].

namespace lfmdfn {

namespace detail {

constexpr double kRgbToYcc[3][3] = {
    {65.481, 128.553, 24.966},
    {-37.797, -74.203, 112.0},
    {112.0, -93.786, -18.214},
};

inline std::array<float, 3> rgb_to_ycbcr_px(double r, double g, double b) {
    const auto& m = kRgbToYcc;
    const double y = (16.0 + m[0][0] * r + m[0][1] * g + m[0][2] * b) / 255.0;
    const double cb = (128.0 + m[1][0] * r + m[1][1] * g + m[1][2] * b) / 255.0;
    const double cr = (128.0 + m[2][0] * r + m[2][1] * g + m[2][2] * b) / 255.0;
    return {static_cast<float>(y), static_cast<float>(cb), static_cast<float>(cr)};
}

// Exact inverse of kRgbToYcc (cofactor expansion), so the round trip is
// limited only by float storage.
inline const std::array<std::array<double, 3>, 3>& ycc_to_rgb_matrix() {
    static const auto inv = [] {
        const auto& m = kRgbToYcc;
        std::array<std::array<double, 3>, 3> r{};
        const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const int a = (j + 1) % 3, b = (j + 2) % 3, c = (i + 1) % 3, d = (i + 2) % 3;
                r[i][j] = (m[a][c] * m[b][d] - m[a][d] * m[b][c]) / det;
            }
        return r;
    }();
    return inv;
}

inline std::array<float, 3> ycbcr_to_rgb_px(double y, double cb, double cr) {
    const auto& m = ycc_to_rgb_matrix();
    const double p[3] = {y * 255.0 - 16.0, cb * 255.0 - 128.0, cr * 255.0 - 128.0};
    std::array<float, 3> out{};
    for (int i = 0; i < 3; ++i) out[i] = static_cast<float>(m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2]);
    return out;
}

template <class F>
void convert_pixels(std::span<const float> src, std::span<float> dst, F&& f) {
    for (std::size_t i = 0; i + 2 < src.size(); i += 3) {
        const auto p = f(src[i], src[i + 1], src[i + 2]);
        dst[i] = p[0];
        dst[i + 1] = p[1];
        dst[i + 2] = p[2];
    }
}

inline void require_three_channels(std::size_t c) {
    if (c != 3) throw ShapeError("color conversion needs 3 channels, got " + std::to_string(c));
}

}  // namespace detail

inline Image2D rgb_to_ycbcr(const Image2D& img) {
    detail::require_three_channels(img.channels);
    Image2D out(img.rows, img.cols, 3);
    detail::convert_pixels(img.data, out.data, detail::rgb_to_ycbcr_px);
    return out;
}

inline Image2D ycbcr_to_rgb(const Image2D& img) {
    detail::require_three_channels(img.channels);
    Image2D out(img.rows, img.cols, 3);
    detail::convert_pixels(img.data, out.data, detail::ycbcr_to_rgb_px);
    return out;
}

inline LightField4D rgb_to_ycbcr(const LightField4D& lf) {
    detail::require_three_channels(lf.C());
    LightField4D out(lf.dims());
    detail::convert_pixels(lf.data(), out.data(), detail::rgb_to_ycbcr_px);
    return out;
}

inline LightField4D ycbcr_to_rgb(const LightField4D& lf) {
    detail::require_three_channels(lf.C());
    LightField4D out(lf.dims());
    detail::convert_pixels(lf.data(), out.data(), detail::ycbcr_to_rgb_px);
    return out;
}

/// Luma of an RGB light field; single-channel input is returned unchanged.
inline LightField4D luma(const LightField4D& lf) {
    if (lf.C() == 1) return lf;
    return extract_channel(rgb_to_ycbcr(lf), 0);
}

/// Replaces channel `c` of `lf` with the single-channel `plane`.
inline LightField4D replace_channel(const LightField4D& lf, std::size_t c, const LightField4D& plane) {
    if (plane.C() != 1 || plane.U() != lf.U() || plane.V() != lf.V() || plane.X() != lf.X() || plane.Y() != lf.Y())
        throw ShapeError("replace_channel: plane dims " + plane.dims().str() + " vs " + lf.dims().str());
    LightField4D out = lf;
    for (std::size_t i = 0; i < plane.data().size(); ++i) out.data()[i * lf.C() + c] = plane.data()[i];
    return out;
}

}  // namespace lfmdfn
