#pragma once

#include <array>
#include <numeric>
#include <string>
#include <vector>

#include "lfmdfn/ad/ops.hpp"
#include "lfmdfn/lf/light_field.hpp"

// Convolutions over a channel-first feature field (C, U, V, X, Y).
//
// With channels outermost the field is a (C x UVXY) matrix, and shifting the
// light field along any of its four axes is a column offset. A k x k
// correlation over one plane folding is then one GEMM against all k*k kernel
// taps stacked, followed by k*k masked shifted accumulations. No folding
// copies or im2col buffers are needed, and the result equals folding, running
// conv2d with zero padding k/2, and unfolding.

namespace lfmdfn::model {

namespace detail {

// (row axis, col axis) of a folding's image plane, as indices into (U,V,X,Y).
inline std::array<std::size_t, 2> plane_axes(PlaneKind kind) {
    switch (kind) {
        case PlaneKind::SAI: return {2, 3};
        case PlaneKind::MicroLens: return {0, 1};
        case PlaneKind::EpiHorizontal: return {1, 3};
        case PlaneKind::EpiVertical: return {0, 2};
    }
    throw std::invalid_argument("unknown plane kind");
}

struct ShiftGeom {
    std::array<std::size_t, 4> n;       // U, V, X, Y
    std::array<std::size_t, 4> stride;  // flat strides of (U,V,X,Y)
    std::size_t total() const { return n[0] * n[1] * n[2] * n[3]; }
};

inline ShiftGeom shift_geom(std::size_t U, std::size_t V, std::size_t X, std::size_t Y) {
    return {{U, V, X, Y}, {V * X * Y, X * Y, Y, 1}};
}

// Calls f(p, q, len) for every contiguous run of positions p whose neighbour
// p + shift is inside the light field; q is that neighbour's flat index.
template <class F>
void for_each_shifted_run(const ShiftGeom& g, const std::array<long, 4>& shift, F&& f) {
    std::array<std::size_t, 4> lo{}, hi{};
    for (std::size_t k = 0; k < 4; ++k) {
        const long n = static_cast<long>(g.n[k]);
        const long l = std::max(0L, -shift[k]), h = std::min(n, n - shift[k]);
        if (l >= h) return;
        lo[k] = static_cast<std::size_t>(l);
        hi[k] = static_cast<std::size_t>(h);
    }
    long delta = 0;
    for (std::size_t k = 0; k < 4; ++k) delta += shift[k] * static_cast<long>(g.stride[k]);
    const std::size_t len = hi[3] - lo[3];
    for (std::size_t u = lo[0]; u < hi[0]; ++u)
        for (std::size_t v = lo[1]; v < hi[1]; ++v)
            for (std::size_t x = lo[2]; x < hi[2]; ++x) {
                const std::size_t p = u * g.stride[0] + v * g.stride[1] + x * g.stride[2] + lo[3];
                f(p, static_cast<std::size_t>(static_cast<long>(p) + delta), len);
            }
}

}  // namespace detail

/// Same-size k x k correlation (zero padding k/2) over the image plane of
/// `kind`. x: (Cin,U,V,X,Y), w: (Cout,Cin,k,k), b: (Cout) -> (Cout,U,V,X,Y).
/// Kernel rows step along the plane's row axis, columns along its col axis.
template <class T>
ad::Tensor<T> plane_conv(const ad::Tensor<T>& x, const ad::Tensor<T>& w, const ad::Tensor<T>& b, PlaneKind kind) {
    using ad::detail::require;
    require(x.rank() == 5, "plane_conv: expects (C,U,V,X,Y), got " + ad::shape_str(x.shape()));
    require(w.rank() == 4 && w.dim(2) == w.dim(3) && w.dim(2) % 2 == 1,
            "plane_conv: weight must be (Cout,Cin,k,k) with odd k, got " + ad::shape_str(w.shape()));
    const std::size_t cin = x.dim(0), cout = w.dim(0), k = w.dim(2), taps = k * k;
    require(w.dim(1) == cin, "plane_conv: channel mismatch, input has " + std::to_string(cin) +
                                 " but weight expects " + std::to_string(w.dim(1)));
    require(b.size() == cout, "plane_conv: bias length must equal output channels");
    const auto geom = detail::shift_geom(x.dim(1), x.dim(2), x.dim(3), x.dim(4));
    const std::size_t N = geom.total();
    const auto axes = detail::plane_axes(kind);
    const long half = static_cast<long>(k / 2);
    auto tap_shift = [axes, half, k](std::size_t t) {
        std::array<long, 4> s{};
        s[axes[0]] = static_cast<long>(t / k) - half;
        s[axes[1]] = static_cast<long>(t % k) - half;
        return s;
    };

    // Stacked weights: row t*cout + co holds W[co, :, t/k, t%k].
    std::vector<T> ws(taps * cout * cin);
    for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t t = 0; t < taps; ++t) ws[(t * cout + co) * cin + ci] = w.data()[(co * cin + ci) * taps + t];

    std::vector<T> out(cout * N);
    {
        std::vector<T> ys(taps * cout * N);
        ad::detail::matmul(ad::detail::MapMat<T>(ys.data(), taps * cout, N),
                           ad::detail::ConstMapMat<T>(ws.data(), taps * cout, cin), ad::detail::ConstMapMat<T>(x.ptr(), cin, N));
        for (std::size_t co = 0; co < cout; ++co) std::fill_n(out.data() + co * N, N, b.data()[co]);
        for (std::size_t t = 0; t < taps; ++t)
            detail::for_each_shifted_run(geom, tap_shift(t), [&](std::size_t p, std::size_t q, std::size_t len) {
                for (std::size_t co = 0; co < cout; ++co) {
                    T* dst = out.data() + co * N + p;
                    const T* src = ys.data() + (t * cout + co) * N + q;
                    for (std::size_t i = 0; i < len; ++i) dst[i] += src[i];
                }
            });
    }

    auto xn = x.node_ptr(), wn = w.node_ptr(), bn = b.node_ptr();
    ad::Shape out_shape{cout, geom.n[0], geom.n[1], geom.n[2], geom.n[3]};
    return ad::Tensor<T>::make_result(std::move(out_shape), std::move(out), {x, w, b},
                                      [xn, wn, bn, ws = std::move(ws), geom, tap_shift, cin, cout, taps, N](auto& self) {
        auto* gx = ad::grad_sink(*xn);
        auto* gw = ad::grad_sink(*wn);
        auto* gb = ad::grad_sink(*bn);
        if (gb)
            for (std::size_t co = 0; co < cout; ++co) {
                T acc = 0;
                for (std::size_t p = 0; p < N; ++p) acc += self.grad[co * N + p];
                (*gb)[co] += acc;
            }
        if (!gx && !gw) return;
        // gs[t*cout + co, q] = grad[co, p] wherever tap t reads q for output p.
        std::vector<T> gs(taps * cout * N, T(0));
        for (std::size_t t = 0; t < taps; ++t)
            detail::for_each_shifted_run(geom, tap_shift(t), [&](std::size_t p, std::size_t q, std::size_t len) {
                for (std::size_t co = 0; co < cout; ++co)
                    std::copy_n(self.grad.data() + co * N + p, len, gs.data() + (t * cout + co) * N + q);
            });
        ad::detail::ConstMapMat<T> gsm(gs.data(), taps * cout, N);
        if (gw) {
            ad::detail::RowMat<T> dws(taps * cout, cin);
            ad::detail::matmul(dws, gsm, ad::detail::ConstMapMat<T>(xn->data.data(), cin, N).transpose());
            for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t t = 0; t < taps; ++t) (*gw)[(co * cin + ci) * taps + t] += dws(t * cout + co, ci);
        }
        if (gx)
            ad::detail::matmul(ad::detail::MapMat<T>(gx->data(), cin, N),
                               ad::detail::ConstMapMat<T>(ws.data(), taps * cout, cin).transpose(), gsm, true);
    });
}

/// 1x1 convolution over the leading channel axis. x: (Cin, ...), w: (Cout,Cin,1,1), b: (Cout) -> (Cout, ...).
template <class T>
ad::Tensor<T> pointwise_conv(const ad::Tensor<T>& x, const ad::Tensor<T>& w, const ad::Tensor<T>& b) {
    using ad::detail::require;
    require(x.rank() >= 2, "pointwise_conv: expects a leading channel axis");
    require(w.rank() == 4 && w.dim(2) == 1 && w.dim(3) == 1, "pointwise_conv: weight must be (Cout,Cin,1,1)");
    const std::size_t cin = x.dim(0), cout = w.dim(0), N = x.size() / cin;
    require(w.dim(1) == cin, "pointwise_conv: channel mismatch, input has " + std::to_string(cin) +
                                 " but weight expects " + std::to_string(w.dim(1)));
    require(b.size() == cout, "pointwise_conv: bias length must equal output channels");
    std::vector<T> out(cout * N);
    ad::detail::MapMat<T> om(out.data(), cout, N);
    ad::detail::matmul(om, ad::detail::ConstMapMat<T>(w.ptr(), cout, cin), ad::detail::ConstMapMat<T>(x.ptr(), cin, N));
    for (std::size_t co = 0; co < cout; ++co) om.row(co).array() += b.data()[co];
    ad::Shape shape = x.shape();
    shape[0] = cout;
    auto xn = x.node_ptr(), wn = w.node_ptr(), bn = b.node_ptr();
    return ad::Tensor<T>::make_result(std::move(shape), std::move(out), {x, w, b},
                                      [xn, wn, bn, cin, cout, N](auto& self) {
        ad::detail::ConstMapMat<T> g(self.grad.data(), cout, N);
        if (auto* gb = ad::grad_sink(*bn))
            for (std::size_t co = 0; co < cout; ++co) {
                const T* row = self.grad.data() + co * N;
                (*gb)[co] += std::accumulate(row, row + N, T(0));
            }
        if (auto* gw = ad::grad_sink(*wn))
            ad::detail::matmul(ad::detail::MapMat<T>(gw->data(), cout, cin), g,
                               ad::detail::ConstMapMat<T>(xn->data.data(), cin, N).transpose(), true);
        if (auto* gx = ad::grad_sink(*xn))
            ad::detail::matmul(ad::detail::MapMat<T>(gx->data(), cin, N),
                               ad::detail::ConstMapMat<T>(wn->data.data(), cout, cin).transpose(), g, true);
    });
}

}  // namespace lfmdfn::model
