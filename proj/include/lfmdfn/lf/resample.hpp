#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "lfmdfn/lf/light_field.hpp"

namespace lfmdfn {

/// Keys cubic convolution kernel with a = -0.5.
inline double cubic_kernel(double x) {
    constexpr double a = -0.5;
    const double ax = std::abs(x), ax2 = ax * ax, ax3 = ax2 * ax;
    if (ax <= 1.0) return (a + 2.0) * ax3 - (a + 3.0) * ax2 + 1.0;
    if (ax < 2.0) return a * ax3 - 5.0 * a * ax2 + 8.0 * a * ax - 4.0 * a;
    return 0.0;
}

/// Exact positive rational scale factor (output / input).
struct Scale {
    std::size_t num = 1, den = 1;
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    std::size_t apply(std::size_t n) const {
        if (n * num % den != 0)
            throw ShapeError("extent " + std::to_string(n) + " is not divisible for scale " + std::to_string(num) +
                             "/" + std::to_string(den));
        return n * num / den;
    }
};

/// Per-output-sample taps of a 1D resampling: input indices and normalized weights.
struct Contributions {
    std::size_t taps = 0;
    std::vector<std::size_t> index;  // out_len * taps
    std::vector<double> weight;      // out_len * taps
};

/// Cubic resampling weights, following the conventional resize: the
/// kernel is stretched by 1/scale when shrinking (antialiasing), pixel
/// centers are aligned, weights are normalized to sum to 1, and the border
/// uses symmetric (mirror) extension.
inline Contributions cubic_contributions(std::size_t in_len, std::size_t out_len, double scale) {
    const bool shrink = scale < 1.0;
    const double kscale = shrink ? scale : 1.0;
    const double width = 4.0 / kscale;
    Contributions c;
    c.taps = static_cast<std::size_t>(std::ceil(width)) + 2;
    c.index.resize(out_len * c.taps);
    c.weight.resize(out_len * c.taps);
    const long n = static_cast<long>(in_len);
    for (std::size_t i = 0; i < out_len; ++i) {
        const double center = (static_cast<double>(i) + 0.5) / scale - 0.5;
        const long left = static_cast<long>(std::floor(center - width / 2.0));
        double total = 0.0;
        for (std::size_t k = 0; k < c.taps; ++k) {
            const long j = left + static_cast<long>(k);
            const double w = kscale * cubic_kernel(kscale * (center - static_cast<double>(j)));
            // Mirror into [0, n): ... 1 0 | 0 1 ... n-1 | n-1 n-2 ...
            long m = j % (2 * n);
            if (m < 0) m += 2 * n;
            if (m >= n) m = 2 * n - 1 - m;
            c.index[i * c.taps + k] = static_cast<std::size_t>(m);
            c.weight[i * c.taps + k] = w;
            total += w;
        }
        for (std::size_t k = 0; k < c.taps; ++k) c.weight[i * c.taps + k] /= total;
    }
    return c;
}

namespace detail {

// Resamples `count` independent lines. Element e of line l is at
// base(l) + e*stride in `src`; output uses the same layout with out_len.
template <class BaseIn, class BaseOut>
void resample_lines(const float* src, float* dst, std::size_t lines, std::size_t in_stride, std::size_t out_stride,
                    const Contributions& c, std::size_t out_len, BaseIn&& base_in, BaseOut&& base_out) {
    for (std::size_t l = 0; l < lines; ++l) {
        const float* s = src + base_in(l);
        float* d = dst + base_out(l);
        for (std::size_t i = 0; i < out_len; ++i) {
            double acc = 0.0;
            for (std::size_t k = 0; k < c.taps; ++k)
                acc += c.weight[i * c.taps + k] * static_cast<double>(s[c.index[i * c.taps + k] * in_stride]);
            d[i * out_stride] = static_cast<float>(acc);
        }
    }
}

}  // namespace detail

/// Resamples a (rows, cols, channels) image to (out_rows, out_cols); rows first, then columns.
inline Image2D bicubic_resize(const Image2D& img, std::size_t out_rows, std::size_t out_cols, double row_scale,
                              double col_scale) {
    const std::size_t ch = img.channels;
    const auto cr = cubic_contributions(img.rows, out_rows, row_scale);
    const auto cc = cubic_contributions(img.cols, out_cols, col_scale);
    Image2D tmp(out_rows, img.cols, ch);
    const std::size_t in_cols = img.cols;
    // Along rows: one line per (col, channel), stride = cols*ch.
    detail::resample_lines(img.data.data(), tmp.data.data(), in_cols * ch, in_cols * ch, in_cols * ch, cr, out_rows,
                           [](std::size_t l) { return l; }, [](std::size_t l) { return l; });
    Image2D out(out_rows, out_cols, ch);
    // Along columns: one line per (row, channel), stride = ch.
    detail::resample_lines(tmp.data.data(), out.data.data(), out_rows * ch, ch, ch, cc, out_cols,
                           [&](std::size_t l) { return (l / ch) * in_cols * ch + l % ch; },
                           [&](std::size_t l) { return (l / ch) * out_cols * ch + l % ch; });
    return out;
}

/// Bicubic resampling of every sub-aperture image by `scale`; angular dims unchanged.
inline LightField4D bicubic_resample_sai(const LightField4D& lf, Scale scale) {
    if (scale.num == 0 || scale.den == 0) throw ShapeError("scale must be positive");
    const std::size_t ox = scale.apply(lf.X()), oy = scale.apply(lf.Y());
    LfDims d = lf.dims();
    d.X = ox;
    d.Y = oy;
    LightField4D out(d);
    for (std::size_t u = 0; u < lf.U(); ++u)
        for (std::size_t v = 0; v < lf.V(); ++v) {
            const Image2D r = bicubic_resize(view_sai(lf, u, v), ox, oy, scale.value(), scale.value());
            std::copy(r.data.begin(), r.data.end(), out.data().begin() + out.index(u, v, 0, 0));
        }
    return out;
}

inline LightField4D bicubic_downsample(const LightField4D& lf, std::size_t r) { return bicubic_resample_sai(lf, {1, r}); }
inline LightField4D bicubic_upsample(const LightField4D& lf, std::size_t r) { return bicubic_resample_sai(lf, {r, 1}); }

/// Nearest-neighbour r-times upsampling of every SAI.
inline LightField4D nearest_upsample(const LightField4D& lf, std::size_t r) {
    LfDims d = lf.dims();
    d.X *= r;
    d.Y *= r;
    LightField4D out(d);
    for (std::size_t u = 0; u < d.U; ++u)
        for (std::size_t v = 0; v < d.V; ++v)
            for (std::size_t x = 0; x < d.X; ++x)
                for (std::size_t y = 0; y < d.Y; ++y)
                    for (std::size_t c = 0; c < d.C; ++c) out.at(u, v, x, y, c) = lf.at(u, v, x / r, y / r, c);
    return out;
}

}  // namespace lfmdfn
