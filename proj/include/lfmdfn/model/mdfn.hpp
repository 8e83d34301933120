#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "lfmdfn/ad/ops.hpp"
#include "lfmdfn/ad/params.hpp"
#include "lfmdfn/lf/light_field.hpp"
#include "lfmdfn/model/config.hpp"
#include "lfmdfn/model/plane_conv.hpp"

// Multi-dimension fusion network.
//
// Tensor layouts used throughout:
//   light field (Y only)   (U, V, X, Y)
//   feature field          (U, V, C, X, Y); blocks run channel-first (C, U, V, X, Y) internally
//   dynamic filter field   (U*V, d*d, rX, rY); tap t = i*d + j, i steps over u, j over v

namespace lfmdfn::model {

using ad::Shape;
using ad::Tensor;

// ---------------------------------------------------------------------------
// Differentiable plane folding of feature fields

namespace detail {

// Axis order (over U,V,C,X,Y) that brings a folding's batch axes first, then
// channels, then the image rows/cols.
inline std::vector<std::size_t> fold_axes(PlaneKind kind) {
    switch (kind) {
        case PlaneKind::SAI: return {0, 1, 2, 3, 4};
        case PlaneKind::MicroLens: return {3, 4, 2, 0, 1};
        case PlaneKind::EpiHorizontal: return {0, 3, 2, 1, 4};
        case PlaneKind::EpiVertical: return {1, 4, 2, 0, 3};
    }
    throw std::invalid_argument("unknown plane kind");
}

inline std::vector<std::size_t> inverse_axes(const std::vector<std::size_t>& axes) {
    std::vector<std::size_t> inv(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) inv[axes[i]] = i;
    return inv;
}

}  // namespace detail

/// (U,V,C,X,Y) -> (batch, C, rows, cols) for the given folding.
template <class T>
Tensor<T> fold_features(const Tensor<T>& f, PlaneKind kind) {
    ad::detail::require(f.rank() == 5, "fold_features: expects (U,V,C,X,Y), got " + ad::shape_str(f.shape()));
    const auto axes = detail::fold_axes(kind);
    const Shape& s = f.shape();
    const Shape folded{s[axes[0]] * s[axes[1]], s[2], s[axes[3]], s[axes[4]]};
    if (kind == PlaneKind::SAI) return ad::reshape(f, folded);
    return ad::reshape(ad::permute(f, axes), folded);
}

/// Inverse of fold_features; `U,V,X,Y` are the light field extents.
template <class T>
Tensor<T> unfold_features(const Tensor<T>& b, PlaneKind kind, std::size_t U, std::size_t V, std::size_t X,
                          std::size_t Y) {
    ad::detail::require(b.rank() == 4, "unfold_features: expects a 4D batch");
    const auto axes = detail::fold_axes(kind);
    const Shape lf{U, V, b.dim(1), X, Y};
    const Shape permuted{lf[axes[0]], lf[axes[1]], lf[axes[2]], lf[axes[3]], lf[axes[4]]};
    ad::detail::require(b.dim(0) == permuted[0] * permuted[1] && b.dim(2) == permuted[3] && b.dim(3) == permuted[4],
                        std::string("unfold_features(") + to_string(kind) + "): batch " + ad::shape_str(b.shape()) +
                            " incompatible with light field extents");
    if (kind == PlaneKind::SAI) return ad::reshape(b, lf);
    return ad::permute(ad::reshape(b, permuted), detail::inverse_axes(axes));
}

// ---------------------------------------------------------------------------
// Parameters

struct ParamSpec {
    std::string name;
    Shape shape;
    enum class Init { Kaiming, KaimingTranspose, Zero, PReLU } init;
};

inline std::string block_prefix(std::size_t i) { return "mdfb" + std::to_string(i); }

/// Ordered parameter layout of a configuration.
inline std::vector<ParamSpec> parameter_specs(const MDFNConfig& cfg) {
    cfg.validate();
    using I = ParamSpec::Init;
    std::vector<ParamSpec> specs;
    const std::size_t k = cfg.branch_kernel, cb = cfg.branch_channels(), r2 = cfg.r * cfg.r;
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const std::size_t cin = i == 0 ? 1 : cfg.c;
        for (PlaneKind kind : cfg.branches()) {
            const std::string p = block_prefix(i) + "." + to_string(kind);
            specs.push_back({p + ".weight", {cb, cin, k, k}, I::Kaiming});
            specs.push_back({p + ".bias", {cb}, I::Zero});
            specs.push_back({p + ".prelu", {cb}, I::PReLU});
        }
    }
    if (cfg.upsampler == Upsampler::DynamicFilter) {
        specs.push_back({"dfb.conv1.weight", {r2 * cfg.dfb_mid_channels, cfg.c, 1, 1}, I::Kaiming});
        specs.push_back({"dfb.conv1.bias", {r2 * cfg.dfb_mid_channels}, I::Zero});
        specs.push_back({"dfb.conv2.weight", {cfg.d * cfg.d, cfg.dfb_mid_channels, 1, 1}, I::Kaiming});
        specs.push_back({"dfb.conv2.bias", {cfg.d * cfg.d}, I::Zero});
    } else {
        specs.push_back({"deconv.weight", {cfg.c, 1, 2 * cfg.r, 2 * cfg.r}, I::KaimingTranspose});
        specs.push_back({"deconv.bias", {1}, I::Zero});
    }
    specs.push_back({"rb.conv1.weight", {cfg.rb_mid_channels, cfg.c, 1, 1}, I::Kaiming});
    specs.push_back({"rb.conv1.bias", {cfg.rb_mid_channels}, I::Zero});
    specs.push_back({"rb.prelu", {cfg.rb_mid_channels}, I::PReLU});
    specs.push_back({"rb.conv2.weight", {r2, cfg.rb_mid_channels, 1, 1}, I::Kaiming});
    specs.push_back({"rb.conv2.bias", {r2}, I::Zero});
    return specs;
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (unsigned char ch : name) h = (h ^ ch) * 1099511628211ull;
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull + h;  // splitmix64 finalizer
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace detail

inline constexpr double kPReLUInit = 0.25;

/// Kaiming-initialized parameters; each tensor's stream is seeded from (cfg.seed, name).
template <class T>
ad::ParamStore<T> init_params(const MDFNConfig& cfg) {
    ad::ParamStore<T> store;
    for (const auto& s : parameter_specs(cfg)) {
        switch (s.init) {
            case ParamSpec::Init::Kaiming:
                store.add(s.name, ad::kaiming_init<T>(s.shape, ad::FanMode::FanIn, detail::mix_seed(cfg.seed, s.name)));
                break;
            case ParamSpec::Init::KaimingTranspose:
                // Each output of a stride-r transposed conv sees Cin*k*k/r^2 inputs.
                store.add(s.name, ad::kaiming_init<T>(s.shape, ad::FanMode::FanOut, detail::mix_seed(cfg.seed, s.name),
                                                      static_cast<double>(cfg.r * cfg.r)));
                break;
            case ParamSpec::Init::Zero: store.add(s.name, Tensor<T>(s.shape, T(0))); break;
            case ParamSpec::Init::PReLU: store.add(s.name, Tensor<T>(s.shape, T(kPReLUInit))); break;
        }
    }
    return store;
}

struct LayerCount {
    std::string layer;
    std::size_t count;
};

/// Scalar parameter count grouped by layer (name up to the last '.').
inline std::vector<LayerCount> parameter_report(const MDFNConfig& cfg) {
    std::vector<LayerCount> rows;
    for (const auto& s : parameter_specs(cfg)) {
        const std::string layer = s.name.substr(0, s.name.rfind('.'));
        if (rows.empty() || rows.back().layer != layer) rows.push_back({layer, 0});
        rows.back().count += ad::numel(s.shape);
    }
    return rows;
}

inline std::size_t count_parameters(const MDFNConfig& cfg) {
    std::size_t total = 0;
    for (const auto& row : parameter_report(cfg)) total += row.count;
    return total;
}

// ---------------------------------------------------------------------------
// Network pieces

namespace detail {

inline const std::vector<std::size_t> kToChannelFirst{2, 0, 1, 3, 4};
inline const std::vector<std::size_t> kToChannelMid{1, 2, 0, 3, 4};

// Block on a channel-first (C,U,V,X,Y) field.
template <class T>
Tensor<T> mdfb_channel_first(const Tensor<T>& f, ad::ParamStore<T>& params, const MDFNConfig& cfg, std::size_t block) {
    const std::size_t expected = block == 0 ? 1 : cfg.c;
    ad::detail::require(f.dim(0) == expected, "mdfb_forward: block " + std::to_string(block) + " expects " +
                                                  std::to_string(expected) + " channels, got " +
                                                  std::to_string(f.dim(0)));
    std::vector<Tensor<T>> outs;
    for (PlaneKind kind : cfg.branches()) {
        const std::string p = block_prefix(block) + "." + to_string(kind);
        Tensor<T> y = plane_conv(f, params.at(p + ".weight"), params.at(p + ".bias"), kind);
        outs.push_back(ad::prelu(y, params.at(p + ".prelu"), 0));
    }
    return outs.size() == 1 ? outs[0] : ad::concat(outs, 0);
}

}  // namespace detail

/// One multi-dimension fusion block: a conv+PReLU branch per active folding,
/// concatenated along channels. (U,V,C,X,Y) -> (U,V,c,X,Y).
template <class T>
Tensor<T> mdfb_forward(const Tensor<T>& f, ad::ParamStore<T>& params, const MDFNConfig& cfg, std::size_t block) {
    ad::detail::require(f.rank() == 5, "mdfb_forward: expects (U,V,C,X,Y), got " + ad::shape_str(f.shape()));
    const Tensor<T> y = detail::mdfb_channel_first(ad::permute(f, detail::kToChannelFirst), params, cfg, block);
    return ad::permute(y, detail::kToChannelMid);
}

/// F_n: n stacked fusion blocks over a (U,V,X,Y) luma light field -> (U,V,c,X,Y).
template <class T>
Tensor<T> mdfn_features(const Tensor<T>& lr, ad::ParamStore<T>& params, const MDFNConfig& cfg) {
    ad::detail::require(lr.rank() == 4, "mdfn_features: expects a (U,V,X,Y) light field");
    Tensor<T> f = ad::reshape(lr, {1, lr.dim(0), lr.dim(1), lr.dim(2), lr.dim(3)});
    for (std::size_t i = 0; i < cfg.n; ++i) f = detail::mdfb_channel_first(f, params, cfg, i);
    return ad::permute(f, detail::kToChannelMid);
}

namespace detail {
template <class T>
Tensor<T> per_sai(const Tensor<T>& f) {
    return ad::reshape(f, {f.dim(0) * f.dim(1), f.dim(2), f.dim(3), f.dim(4)});
}
}  // namespace detail

/// Dynamic filter branch: 1x1 conv, pixel shuffle, 1x1 conv, softmax over taps.
/// Returns (U*V, d*d, rX, rY).
template <class T>
Tensor<T> dfb_forward(const Tensor<T>& f, ad::ParamStore<T>& params, const MDFNConfig& cfg) {
    Tensor<T> h = ad::conv2d(detail::per_sai(f), params.at("dfb.conv1.weight"), params.at("dfb.conv1.bias"), 0, 0);
    h = ad::pixel_shuffle(h, cfg.r);
    h = ad::conv2d(h, params.at("dfb.conv2.weight"), params.at("dfb.conv2.bias"), 0, 0);
    return ad::softmax(h, 1);
}

/// Residual branch: 1x1 conv + PReLU, 1x1 conv to r^2 channels, pixel shuffle.
/// Returns (U,V,rX,rY).
template <class T>
Tensor<T> rb_forward(const Tensor<T>& f, ad::ParamStore<T>& params, const MDFNConfig& cfg) {
    Tensor<T> h = ad::conv2d(detail::per_sai(f), params.at("rb.conv1.weight"), params.at("rb.conv1.bias"), 0, 0);
    h = ad::prelu(h, params.at("rb.prelu"));
    h = ad::conv2d(h, params.at("rb.conv2.weight"), params.at("rb.conv2.bias"), 0, 0);
    h = ad::pixel_shuffle(h, cfg.r);
    return ad::reshape(h, {f.dim(0), f.dim(1), h.dim(2), h.dim(3)});
}

/// Per-pixel filtering over the angular window:
///
///   out(u,v,p,q) = sum_{i,j<d} F(u*V+v, i*d+j, p, q) * lr(u+i-d/2, v+j-d/2, p/r, q/r)
///
/// Angular taps outside the grid read zero. filters: (U*V, d*d, rX, rY); lr: (U,V,X,Y).
template <class T>
Tensor<T> apply_dynamic_filters(const Tensor<T>& filters, const Tensor<T>& lr, std::size_t r) {
    ad::detail::require(lr.rank() == 4 && filters.rank() == 4, "apply_dynamic_filters: expects 4D tensors");
    const std::size_t U = lr.dim(0), V = lr.dim(1), X = lr.dim(2), Y = lr.dim(3);
    const std::size_t taps = filters.dim(1);
    std::size_t d = 1;
    while (d * d < taps) ++d;
    ad::detail::require(d * d == taps && d % 2 == 1, "apply_dynamic_filters: tap count must be an odd square");
    ad::detail::require(r >= 1 && filters.dim(0) == U * V && filters.dim(2) == r * X && filters.dim(3) == r * Y,
                        "apply_dynamic_filters: filter field " + ad::shape_str(filters.shape()) +
                            " does not match light field " + ad::shape_str(lr.shape()) + " at r=" + std::to_string(r));
    const std::size_t RX = r * X, RY = r * Y, P = RX * RY;
    const long h = static_cast<long>(d / 2);

    // Calls f(tap index, source view index) for every in-range tap of view (u,v).
    auto for_taps = [=](std::size_t u, std::size_t v, auto&& f) {
        for (std::size_t i = 0; i < d; ++i) {
            const long su = static_cast<long>(u + i) - h;
            if (su < 0 || su >= static_cast<long>(U)) continue;
            for (std::size_t j = 0; j < d; ++j) {
                const long sv = static_cast<long>(v + j) - h;
                if (sv < 0 || sv >= static_cast<long>(V)) continue;
                f(i * d + j, static_cast<std::size_t>(su) * V + static_cast<std::size_t>(sv));
            }
        }
    };

    std::vector<T> out(U * V * P, T(0));
    const T* F = filters.ptr();
    const T* L = lr.ptr();
    for (std::size_t u = 0; u < U; ++u)
        for (std::size_t v = 0; v < V; ++v) {
            T* o = out.data() + (u * V + v) * P;
            const T* fv = F + (u * V + v) * taps * P;
            for_taps(u, v, [&](std::size_t t, std::size_t src) {
                const T* ft = fv + t * P;
                const T* img = L + src * X * Y;
                for (std::size_t p = 0; p < RX; ++p) {
                    const T* row = img + (p / r) * Y;
                    for (std::size_t q = 0; q < RY; ++q) o[p * RY + q] += ft[p * RY + q] * row[q / r];
                }
            });
        }

    auto fn = filters.node_ptr(), ln = lr.node_ptr();
    return Tensor<T>::make_result({U, V, RX, RY}, std::move(out), {filters, lr},
                                  [fn, ln, for_taps, U, V, X, Y, r, taps, RX, RY, P](auto& self) {
        auto* gF = ad::grad_sink(*fn);
        auto* gL = ad::grad_sink(*ln);
        for (std::size_t u = 0; u < U; ++u)
            for (std::size_t v = 0; v < V; ++v) {
                const T* g = self.grad.data() + (u * V + v) * P;
                const std::size_t fbase = (u * V + v) * taps * P;
                for_taps(u, v, [&](std::size_t t, std::size_t src) {
                    const T* img = ln->data.data() + src * X * Y;
                    const T* ft = fn->data.data() + fbase + t * P;
                    for (std::size_t p = 0; p < RX; ++p)
                        for (std::size_t q = 0; q < RY; ++q) {
                            const std::size_t e = p * RY + q;
                            const std::size_t li = (p / r) * Y + q / r;
                            if (gF) (*gF)[fbase + t * P + e] += g[e] * img[li];
                            if (gL) (*gL)[src * X * Y + li] += g[e] * ft[e];
                        }
                });
            }
    });
}

/// Upsampled image from the transposed-convolution ablation path: (U,V,rX,rY).
template <class T>
Tensor<T> deconv_upsample(const Tensor<T>& f, ad::ParamStore<T>& params, const MDFNConfig& cfg) {
    Tensor<T> h = ad::conv_transpose2d(detail::per_sai(f), params.at("deconv.weight"), params.at("deconv.bias"), cfg.r,
                                       cfg.r / 2);
    return ad::reshape(h, {f.dim(0), f.dim(1), h.dim(2), h.dim(3)});
}

/// Intermediate results of a forward pass.
template <class T>
struct ForwardResult {
    Tensor<T> features;   // F_n
    Tensor<T> filters;    // undefined for the deconvolution upsampler
    Tensor<T> upsampled;  // I^U
    Tensor<T> residual;   // I^R
    Tensor<T> output;     // I^sr
};

/// I^sr = I^U + I^R over a (U,V,X,Y) luma light field.
template <class T>
ForwardResult<T> forward_full(const Tensor<T>& lr, ad::ParamStore<T>& params, const MDFNConfig& cfg) {
    ad::detail::require(lr.rank() == 4, "forward: expects a (U,V,X,Y) light field");
    ad::detail::require(lr.dim(2) >= cfg.branch_kernel / 2 + 1 && lr.dim(3) >= cfg.branch_kernel / 2 + 1,
                        "forward: spatial dims too small for the branch kernel");
    ForwardResult<T> res;
    res.features = mdfn_features(lr, params, cfg);
    if (cfg.upsampler == Upsampler::DynamicFilter) {
        res.filters = dfb_forward(res.features, params, cfg);
        res.upsampled = apply_dynamic_filters(res.filters, lr, cfg.r);
    } else {
        res.upsampled = deconv_upsample(res.features, params, cfg);
    }
    res.residual = rb_forward(res.features, params, cfg);
    res.output = ad::add(res.upsampled, res.residual);
    return res;
}

template <class T>
Tensor<T> forward(const Tensor<T>& lr, ad::ParamStore<T>& params, const MDFNConfig& cfg) {
    return forward_full(lr, params, cfg).output;
}

// ---------------------------------------------------------------------------
// LightField4D bridges

inline Tensor<float> to_tensor(const LightField4D& lf) {
    if (lf.C() != 1) throw ShapeError("model input must be single-channel (Y), got C=" + std::to_string(lf.C()));
    return Tensor<float>({lf.U(), lf.V(), lf.X(), lf.Y()}, std::vector<float>(lf.data().begin(), lf.data().end()));
}

template <class T>
LightField4D to_light_field(const Tensor<T>& t) {
    ad::detail::require(t.rank() == 4, "to_light_field: expects (U,V,X,Y)");
    return LightField4D({t.dim(0), t.dim(1), t.dim(2), t.dim(3), 1},
                        std::vector<float>(t.data().begin(), t.data().end()));
}

/// Per-output-pixel filter bank with the (U,V,rX,rY,d,d) indexing convention.
struct DynamicFilterField {
    std::size_t U = 0, V = 0, RX = 0, RY = 0, d = 0;
    std::vector<float> data;  // (U*V, d*d, RX, RY)

    static DynamicFilterField from_tensor(const Tensor<float>& t, std::size_t U, std::size_t V) {
        std::size_t d = 1;
        while (d * d < t.dim(1)) ++d;
        return {U, V, t.dim(2), t.dim(3), d, t.data()};
    }

    float at(std::size_t u, std::size_t v, std::size_t p, std::size_t q, std::size_t i, std::size_t j) const {
        return data[(((u * V + v) * d * d + i * d + j) * RX + p) * RY + q];
    }
};

/// Super-resolves a luma light field (no graph is kept).
inline LightField4D super_resolve(const LightField4D& lr, ad::ParamStore<float>& params, const MDFNConfig& cfg) {
    ad::NoGradGuard guard;
    return to_light_field(forward(to_tensor(lr), params, cfg));
}

}  // namespace lfmdfn::model
