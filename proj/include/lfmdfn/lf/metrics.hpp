#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "lfmdfn/lf/light_field.hpp"

namespace lfmdfn {

/// Peak signal-to-noise ratio in dB. Identical images give +infinity.
inline double psnr(const Image2D& a, const Image2D& b, double peak = 1.0) {
    if (!a.same_shape(b)) throw ShapeError("psnr: image shapes differ");
    if (a.data.empty()) throw ShapeError("psnr: empty image");
    double se = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - static_cast<double>(b.data[i]);
        se += d * d;
    }
    const double mse = se / static_cast<double>(a.data.size());
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / mse);
}

struct SsimParams {
    std::size_t window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    double dynamic_range = 1.0;
};

/// Mean structural similarity over all fully-covered 11x11 Gaussian windows
/// of a single-channel image.
inline double ssim(const Image2D& a, const Image2D& b, const SsimParams& p = {}) {
    if (!a.same_shape(b)) throw ShapeError("ssim: image shapes differ");
    if (a.channels != 1) throw ShapeError("ssim: expects a single channel, got " + std::to_string(a.channels));
    const std::size_t n = p.window;
    if (a.rows < n || a.cols < n)
        throw ShapeError("ssim: image " + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                         " smaller than the " + std::to_string(n) + "x" + std::to_string(n) + " window");

    std::vector<double> g(n);
    double gs = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) - static_cast<double>(n - 1) / 2.0;
        g[i] = std::exp(-t * t / (2.0 * p.sigma * p.sigma));
        gs += g[i];
    }
    for (auto& v : g) v /= gs;

    const double c1 = std::pow(p.k1 * p.dynamic_range, 2), c2 = std::pow(p.k2 * p.dynamic_range, 2);
    const std::size_t orows = a.rows - n + 1, ocols = a.cols - n + 1;
    double total = 0.0;
    for (std::size_t r = 0; r < orows; ++r)
        for (std::size_t c = 0; c < ocols; ++c) {
            double ma = 0, mb = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const double w = g[i] * g[j];
                    const double va = a.at(r + i, c + j), vb = b.at(r + i, c + j);
                    ma += w * va;
                    mb += w * vb;
                    saa += w * va * va;
                    sbb += w * vb * vb;
                    sab += w * va * vb;
                }
            const double var_a = saa - ma * ma, var_b = sbb - mb * mb, cov = sab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
    return total / static_cast<double>(orows * ocols);
}

struct LfScore {
    double psnr = 0.0;
    double ssim = 0.0;
};

/// PSNR/SSIM of channel 0 for every sub-aperture image, averaged over views in index order.
inline LfScore lf_metrics(const LightField4D& ref, const LightField4D& test, double peak = 1.0) {
    if (!(ref.dims() == test.dims()))
        throw ShapeError("lf_metrics: dims " + ref.dims().str() + " vs " + test.dims().str());
    const LightField4D ry = ref.C() == 1 ? ref : extract_channel(ref, 0);
    const LightField4D ty = test.C() == 1 ? test : extract_channel(test, 0);
    LfScore s;
    for (std::size_t u = 0; u < ref.U(); ++u)
        for (std::size_t v = 0; v < ref.V(); ++v) {
            const Image2D a = view_sai(ry, u, v), b = view_sai(ty, u, v);
            s.psnr += psnr(a, b, peak);
            s.ssim += ssim(a, b, SsimParams{.dynamic_range = peak});
        }
    const double views = static_cast<double>(ref.U() * ref.V());
    s.psnr /= views;
    s.ssim /= views;
    return s;
}

}  // namespace lfmdfn
