#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "lfmdfn/ad/tensor.hpp"

// Differentiable operator set. All image-shaped tensors are NCHW, row-major.
// Convolutions use cross-correlation semantics (the kernel is not flipped).

namespace lfmdfn::ad {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMapMat = Eigen::Map<const RowMat<T>>;

// dst = a * b, or dst += a * b. Vector-shaped and tiny products are summed in
// a fixed order so results do not depend on buffer alignment.
template <class Dst, class A, class B>
void matmul(Dst&& dst, const A& a, const B& b, bool accumulate = false) {
    using Scalar = typename std::decay_t<Dst>::Scalar;
    if (dst.rows() == 1 || dst.cols() == 1 || dst.rows() + dst.cols() + a.cols() < 20) {
        for (Eigen::Index i = 0; i < dst.rows(); ++i)
            for (Eigen::Index j = 0; j < dst.cols(); ++j) {
                Scalar acc = accumulate ? dst(i, j) : Scalar(0);
                for (Eigen::Index k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
                dst(i, j) = acc;
            }
    } else if (accumulate) {
        dst.noalias() += a * b;
    } else {
        dst.noalias() = a * b;
    }
}

/// Geometry of a strided, zero-padded 2D correlation from an (H,W) image to
/// an (out_h,out_w) grid.
struct ConvGeom {
    std::size_t channels, h, w, kh, kw, stride, ph, pw, out_h, out_w;
    std::size_t k_rows() const { return channels * kh * kw; }
    std::size_t out_pixels() const { return out_h * out_w; }
};

// Output columns [lo, hi) of kernel column `j` read inside the image; the rest hit padding.
inline std::pair<std::size_t, std::size_t> valid_cols(const ConvGeom& g, std::size_t j) {
    std::size_t lo = 0;
    while (lo < g.out_w && lo * g.stride + j < g.pw) ++lo;
    std::size_t hi = lo;
    while (hi < g.out_w && hi * g.stride + j < g.pw + g.w) ++hi;
    return {lo, hi};
}

// col has k_rows() rows with leading dimension `ld`; this image's columns start at `col0`.
template <class T>
void im2col(const T* img, const ConvGeom& g, T* col, std::size_t ld, std::size_t col0) {
    for (std::size_t j = 0; j < g.kw; ++j) {
        const auto [lo, hi] = valid_cols(g, j);
        for (std::size_t c = 0; c < g.channels; ++c) {
            const T* plane = img + c * g.h * g.w;
            for (std::size_t i = 0; i < g.kh; ++i) {
                T* row = col + ((c * g.kh + i) * g.kw + j) * ld + col0;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::size_t ih = oh * g.stride + i;
                    T* dst = row + oh * g.out_w;
                    if (ih < g.ph || ih >= g.ph + g.h) {
                        std::fill(dst, dst + g.out_w, T(0));
                        continue;
                    }
                    const T* src = plane + (ih - g.ph) * g.w + j - static_cast<long>(g.pw);
                    std::fill(dst, dst + lo, T(0));
                    if (g.stride == 1) {
                        std::copy(src + lo, src + hi, dst + lo);
                    } else {
                        for (std::size_t ow = lo; ow < hi; ++ow) dst[ow] = src[ow * g.stride];
                    }
                    std::fill(dst + hi, dst + g.out_w, T(0));
                }
            }
        }
    }
}

// Adjoint of im2col: accumulates columns back into the image.
template <class T>
void col2im(const T* col, const ConvGeom& g, std::size_t ld, std::size_t col0, T* img) {
    for (std::size_t j = 0; j < g.kw; ++j) {
        const auto [lo, hi] = valid_cols(g, j);
        for (std::size_t c = 0; c < g.channels; ++c) {
            T* plane = img + c * g.h * g.w;
            for (std::size_t i = 0; i < g.kh; ++i) {
                const T* row = col + ((c * g.kh + i) * g.kw + j) * ld + col0;
                for (std::size_t oh = 0; oh < g.out_h; ++oh) {
                    const std::size_t ih = oh * g.stride + i;
                    if (ih < g.ph || ih >= g.ph + g.h) continue;
                    T* dst = plane + (ih - g.ph) * g.w + j - static_cast<long>(g.pw);
                    const T* src = row + oh * g.out_w;
                    for (std::size_t ow = lo; ow < hi; ++ow) dst[ow * g.stride] += src[ow];
                }
            }
        }
    }
}

// Number of images processed per GEMM so that the column buffer stays cache-sized.
inline std::size_t images_per_chunk(std::size_t pixels_per_image) {
    constexpr std::size_t target_cols = 512;
    return std::max<std::size_t>(1, target_cols / std::max<std::size_t>(1, pixels_per_image));
}

inline void require(bool cond, const std::string& what) {
    if (!cond) throw DimensionError(what);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Structural ops

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    detail::require(numel(shape) == x.size(),
                    "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
    auto xn = x.node_ptr();
    return Tensor<T>::make_result(std::move(shape), x.data(), {x}, [xn](auto& self) {
        auto& g = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    });
}

namespace detail {

// Walks `in` in the order of the permuted output, calling f(out_index, in_index).
template <class F>
void for_each_permuted(const Shape& in_shape, const std::vector<std::size_t>& axes, F&& f) {
    const std::size_t rank = in_shape.size();
    std::vector<std::size_t> in_stride(rank, 1);
    for (std::size_t i = rank; i-- > 1;) in_stride[i - 1] = in_stride[i] * in_shape[i];
    Shape out_shape(rank);
    std::vector<std::size_t> src_stride(rank);
    for (std::size_t i = 0; i < rank; ++i) {
        out_shape[i] = in_shape[axes[i]];
        src_stride[i] = in_stride[axes[i]];
    }
    const std::size_t total = numel(in_shape);
    if (total == 0) return;
    const std::size_t inner = out_shape[rank - 1];
    const std::size_t inner_stride = src_stride[rank - 1];
    std::vector<std::size_t> idx(rank, 0);
    std::size_t base = 0;
    for (std::size_t o = 0; o < total; o += inner) {
        for (std::size_t k = 0; k < inner; ++k) f(o + k, base + k * inner_stride);
        // Advance the odometer over all but the innermost axis.
        for (std::size_t a = rank - 1; a-- > 0;) {
            base += src_stride[a];
            if (++idx[a] < out_shape[a]) break;
            base -= src_stride[a] * out_shape[a];
            idx[a] = 0;
        }
    }
}

}  // namespace detail

/// Axis permutation: output axis i is input axis `axes[i]`.
template <class T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<std::size_t>& axes) {
    const std::size_t rank = x.rank();
    detail::require(axes.size() == rank, "permute: axis count mismatch");
    std::vector<bool> used(rank, false);
    for (auto a : axes) {
        detail::require(a < rank && !used[a], "permute: axes must be a permutation");
        used[a] = true;
    }
    Shape out_shape(rank);
    for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.dim(axes[i]);
    std::vector<T> out(x.size());
    const T* src = x.ptr();
    detail::for_each_permuted(x.shape(), axes, [&](std::size_t o, std::size_t i) { out[o] = src[i]; });
    auto xn = x.node_ptr();
    Shape in_shape = x.shape();
    return Tensor<T>::make_result(out_shape, std::move(out), {x}, [xn, in_shape, axes](auto& self) {
        auto& g = xn->ensure_grad();
        detail::for_each_permuted(in_shape, axes,
                                  [&](std::size_t o, std::size_t i) { g[i] += self.grad[o]; });
    });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.shape() == b.shape(), "add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [an, bn](auto& self) {
        for (auto* n : {an.get(), bn.get()}) {
            if (auto* g = grad_sink(*n))
                for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
        }
    });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T s) {
    std::vector<T> out(x.data());
    for (auto& v : out) v *= s;
    auto xn = x.node_ptr();
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [xn, s](auto& self) {
        auto& g = xn->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * self.grad[i];
    });
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
    T acc = 0;
    for (T v : x.data()) acc += v;
    auto xn = x.node_ptr();
    return Tensor<T>::make_result({1}, {acc}, {x}, [xn](auto& self) {
        auto& g = xn->ensure_grad();
        for (auto& v : g) v += self.grad[0];
    });
}

/// Elementwise product; used by tests to build scalar probes.
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.shape() == b.shape(), "mul: shape mismatch");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto an = a.node_ptr();
    auto bn = b.node_ptr();
    return Tensor<T>::make_result(a.shape(), std::move(out), {a, b}, [an, bn](auto& self) {
        if (auto* g = grad_sink(*an))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * bn->data[i];
        if (auto* g = grad_sink(*bn))
            for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * an->data[i];
    });
}

template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, std::size_t axis) {
    detail::require(!xs.empty(), "concat: empty input list");
    const Shape& s0 = xs[0].shape();
    detail::require(axis < s0.size(), "concat: axis " + std::to_string(axis) + " out of range");
    Shape out_shape = s0;
    out_shape[axis] = 0;
    for (const auto& x : xs) {
        detail::require(x.rank() == s0.size(), "concat: rank mismatch");
        for (std::size_t a = 0; a < s0.size(); ++a)
            if (a != axis)
                detail::require(x.dim(a) == s0[a], "concat: off-axis mismatch " + shape_str(x.shape()) +
                                                       " vs " + shape_str(s0));
        out_shape[axis] += x.dim(axis);
    }
    std::size_t outer = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= s0[a];
    for (std::size_t a = axis + 1; a < s0.size(); ++a) inner *= s0[a];
    const std::size_t out_row = out_shape[axis] * inner;

    std::vector<T> out(numel(out_shape));
    std::size_t offset = 0;
    std::vector<std::size_t> offsets;
    for (const auto& x : xs) {
        const std::size_t row = x.dim(axis) * inner;
        for (std::size_t o = 0; o < outer; ++o)
            std::copy_n(x.ptr() + o * row, row, out.data() + o * out_row + offset);
        offsets.push_back(offset);
        offset += row;
    }
    std::vector<std::shared_ptr<detail::Node<T>>> nodes;
    for (const auto& x : xs) nodes.push_back(x.node_ptr());
    return Tensor<T>::make_result(out_shape, std::move(out), xs,
                                  [nodes, offsets, outer, out_row](auto& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            auto* g = grad_sink(*nodes[k]);
            if (!g) continue;
            const std::size_t row = g->size() / outer;
            for (std::size_t o = 0; o < outer; ++o) {
                const T* src = self.grad.data() + o * out_row + offsets[k];
                T* dst = g->data() + o * row;
                for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// Convolutions

/// Stride-1 zero-padded 2D cross-correlation.
/// x: (N,Cin,H,W), w: (Cout,Cin,kh,kw), b: (Cout) -> (N,Cout,H+2ph-kh+1,W+2pw-kw+1).
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t ph,
                 std::size_t pw) {
    detail::require(x.rank() == 4, "conv2d: input must be NCHW, got " + shape_str(x.shape()));
    detail::require(w.rank() == 4, "conv2d: weight must be (Cout,Cin,kh,kw)");
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    detail::require(w.dim(1) == cin, "conv2d: channel mismatch, input has " + std::to_string(cin) +
                                         " but weight expects " + std::to_string(w.dim(1)));
    detail::require(b.size() == cout, "conv2d: bias length must equal output channels");
    detail::require(kh <= h + 2 * ph && kw <= wd + 2 * pw, "conv2d: kernel larger than padded input");
    const detail::ConvGeom g{cin, h, wd, kh, kw, 1, ph, pw, h + 2 * ph - kh + 1, wd + 2 * pw - kw + 1};
    const std::size_t P = g.out_pixels(), K = g.k_rows();
    const std::size_t in_img = cin * h * wd, out_img = cout * P;
    const std::size_t chunk = detail::images_per_chunk(P);

    std::vector<T> out(n * out_img);
    {
        std::vector<T> col(K * chunk * P), y(cout * chunk * P);
        detail::ConstMapMat<T> wm(w.ptr(), cout, K);
        for (std::size_t n0 = 0; n0 < n; n0 += chunk) {
            const std::size_t nb = std::min(chunk, n - n0), L = nb * P;
            for (std::size_t i = 0; i < nb; ++i) detail::im2col(x.ptr() + (n0 + i) * in_img, g, col.data(), L, i * P);
            detail::MapMat<T> ym(y.data(), cout, L);
            detail::matmul(ym, wm, detail::ConstMapMat<T>(col.data(), K, L));
            for (std::size_t i = 0; i < nb; ++i)
                for (std::size_t co = 0; co < cout; ++co) {
                    const T* src = y.data() + co * L + i * P;
                    T* dst = out.data() + (n0 + i) * out_img + co * P;
                    const T bias = b.data()[co];
                    for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + bias;
                }
        }
    }
    auto xn = x.node_ptr(), wn = w.node_ptr(), bn = b.node_ptr();
    return Tensor<T>::make_result({n, cout, g.out_h, g.out_w}, std::move(out), {x, w, b},
                                  [xn, wn, bn, g, n, cout, chunk](auto& self) {
        const std::size_t P = g.out_pixels(), K = g.k_rows(), cin = g.channels, HW = g.h * g.w;
        const std::size_t in_img = cin * HW, out_img = cout * P;
        auto* gx = grad_sink(*xn);
        auto* gw = grad_sink(*wn);
        auto* gb = grad_sink(*bn);
        std::vector<T> col(K * chunk * P), gy(cout * chunk * P);
        detail::ConstMapMat<T> wm(wn->data.data(), cout, K);

        // Input gradient as a correlation of gy with the flipped, transposed
        // kernel (padding k-1-p). Needs p < k so that padding is non-negative.
        const bool flip_path = gx && g.ph < g.kh && g.pw < g.kw;
        const detail::ConvGeom gt{cout, g.out_h, g.out_w, g.kh, g.kw, 1, g.kh - 1 - g.ph, g.kw - 1 - g.pw, g.h, g.w};
        std::vector<T> wf, colt, dx;
        if (flip_path) {
            wf.resize(cin * cout * g.kh * g.kw);
            for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t a = 0; a < g.kh; ++a)
                        for (std::size_t b = 0; b < g.kw; ++b)
                            wf[((ci * cout + co) * g.kh + a) * g.kw + b] =
                                wn->data[((co * cin + ci) * g.kh + (g.kh - 1 - a)) * g.kw + (g.kw - 1 - b)];
            colt.resize(gt.k_rows() * chunk * HW);
            dx.resize(cin * chunk * HW);
        }

        for (std::size_t n0 = 0; n0 < n; n0 += chunk) {
            const std::size_t nb = std::min(chunk, n - n0), L = nb * P;
            for (std::size_t i = 0; i < nb; ++i)
                for (std::size_t co = 0; co < cout; ++co)
                    std::copy_n(self.grad.data() + (n0 + i) * out_img + co * P, P, gy.data() + co * L + i * P);
            detail::ConstMapMat<T> gym(gy.data(), cout, L);
            if (gb)
                for (std::size_t co = 0; co < cout; ++co)
                    (*gb)[co] += std::accumulate(gy.data() + co * L, gy.data() + (co + 1) * L, T(0));
            if (gw) {
                for (std::size_t i = 0; i < nb; ++i)
                    detail::im2col(xn->data.data() + (n0 + i) * in_img, g, col.data(), L, i * P);
                detail::matmul(detail::MapMat<T>(gw->data(), cout, K), gym,
                               detail::ConstMapMat<T>(col.data(), K, L).transpose(), true);
            }
            if (flip_path) {
                const std::size_t LT = nb * HW, KT = gt.k_rows();
                for (std::size_t i = 0; i < nb; ++i)
                    detail::im2col(self.grad.data() + (n0 + i) * out_img, gt, colt.data(), LT, i * HW);
                detail::matmul(detail::MapMat<T>(dx.data(), cin, LT), detail::ConstMapMat<T>(wf.data(), cin, KT),
                               detail::ConstMapMat<T>(colt.data(), KT, LT));
                for (std::size_t i = 0; i < nb; ++i)
                    for (std::size_t ci = 0; ci < cin; ++ci) {
                        const T* src = dx.data() + ci * LT + i * HW;
                        T* dst = gx->data() + (n0 + i) * in_img + ci * HW;
                        for (std::size_t p = 0; p < HW; ++p) dst[p] += src[p];
                    }
            } else if (gx) {
                detail::MapMat<T> cm(col.data(), K, L);
                detail::matmul(cm, wm.transpose(), gym);
                for (std::size_t i = 0; i < nb; ++i)
                    detail::col2im(col.data(), g, L, i * P, gx->data() + (n0 + i) * in_img);
            }
        }
    });
}

/// Transposed 2D convolution (adjoint of a strided correlation with the same
/// weight, stride and padding).
/// x: (N,Cin,H,W), w: (Cin,Cout,kh,kw), b: (Cout) -> (N,Cout,(H-1)s-2p+kh,(W-1)s-2p+kw).
template <class T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                           std::size_t pad) {
    detail::require(x.rank() == 4 && w.rank() == 4, "conv_transpose2d: expects NCHW input and 4D weight");
    detail::require(stride >= 1, "conv_transpose2d: stride must be >= 1");
    const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    detail::require(w.dim(0) == cin, "conv_transpose2d: channel mismatch, input has " + std::to_string(cin) +
                                         " but weight expects " + std::to_string(w.dim(0)));
    detail::require(b.size() == cout, "conv_transpose2d: bias length must equal output channels");
    detail::require((h - 1) * stride + kh > 2 * pad && (wd - 1) * stride + kw > 2 * pad,
                    "conv_transpose2d: padding consumes the whole output");
    const std::size_t oh = (h - 1) * stride + kh - 2 * pad, ow = (wd - 1) * stride + kw - 2 * pad;
    // Geometry of the forward correlation this op is the adjoint of: (oh,ow) -> (h,w).
    const detail::ConvGeom g{cout, oh, ow, kh, kw, stride, pad, pad, h, wd};
    const std::size_t P = h * wd, K = g.k_rows();
    const std::size_t in_img = cin * P, out_img = cout * oh * ow;

    std::vector<T> out(n * out_img, T(0));
    {
        std::vector<T> col(K * P);
        detail::ConstMapMat<T> wm(w.ptr(), cin, K);
        for (std::size_t i = 0; i < n; ++i) {
            detail::matmul(detail::MapMat<T>(col.data(), K, P), wm.transpose(),
                           detail::ConstMapMat<T>(x.ptr() + i * in_img, cin, P));
            T* dst = out.data() + i * out_img;
            detail::col2im(col.data(), g, P, 0, dst);
            for (std::size_t co = 0; co < cout; ++co)
                for (std::size_t p = 0; p < oh * ow; ++p) dst[co * oh * ow + p] += b.data()[co];
        }
    }
    auto xn = x.node_ptr(), wn = w.node_ptr(), bn = b.node_ptr();
    return Tensor<T>::make_result({n, cout, oh, ow}, std::move(out), {x, w, b},
                                  [xn, wn, bn, g, n, cin, cout](auto& self) {
        const std::size_t P = g.out_pixels(), K = g.k_rows(), OP = g.h * g.w;
        const std::size_t in_img = cin * P, out_img = cout * OP;
        auto* gx = grad_sink(*xn);
        auto* gw = grad_sink(*wn);
        auto* gb = grad_sink(*bn);
        std::vector<T> col(K * P);
        detail::ConstMapMat<T> wm(wn->data.data(), cin, K);
        for (std::size_t i = 0; i < n; ++i) {
            const T* gy = self.grad.data() + i * out_img;
            if (gb)
                for (std::size_t co = 0; co < cout; ++co)
                    for (std::size_t p = 0; p < OP; ++p) (*gb)[co] += gy[co * OP + p];
            detail::im2col(gy, g, col.data(), P, 0);
            detail::ConstMapMat<T> cm(col.data(), K, P);
            if (gx)
                detail::matmul(detail::MapMat<T>(gx->data() + i * in_img, cin, P), wm, cm, true);
            if (gw)
                detail::matmul(detail::MapMat<T>(gw->data(), cin, K),
                               detail::ConstMapMat<T>(xn->data.data() + i * in_img, cin, P), cm.transpose(), true);
        }
    });
}

// ---------------------------------------------------------------------------
// Pointwise and normalization

/// Parametric ReLU with one learnable slope per channel along `axis`.
template <class T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slope, std::size_t axis = 1) {
    detail::require(axis < x.rank(), "prelu: input needs a channel axis");
    const std::size_t c = x.dim(axis);
    std::size_t n = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) n *= x.dim(a);
    for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
    detail::require(slope.size() == c, "prelu: slope count " + std::to_string(slope.size()) +
                                           " != channel count " + std::to_string(c));
    std::vector<T> out(x.size());
    const T* xs = x.ptr();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T a = slope.data()[ch];
            const std::size_t base = (i * c + ch) * inner;
            for (std::size_t k = 0; k < inner; ++k) {
                const T v = xs[base + k];
                out[base + k] = v >= T(0) ? v : a * v;
            }
        }
    auto xn = x.node_ptr(), an = slope.node_ptr();
    return Tensor<T>::make_result(x.shape(), std::move(out), {x, slope}, [xn, an, n, c, inner](auto& self) {
        auto* gx = grad_sink(*xn);
        auto* ga = grad_sink(*an);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const T a = an->data[ch];
                const std::size_t base = (i * c + ch) * inner;
                T acc = 0;
                for (std::size_t k = 0; k < inner; ++k) {
                    const T v = xn->data[base + k], gy = self.grad[base + k];
                    if (v >= T(0)) {
                        if (gx) (*gx)[base + k] += gy;
                    } else {
                        if (gx) (*gx)[base + k] += a * gy;
                        acc += gy * v;
                    }
                }
                if (ga) (*ga)[ch] += acc;
            }
    });
}

/// Softmax along `axis`, computed with max subtraction.
template <class T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
    detail::require(axis < x.rank(), "softmax: axis out of range");
    std::size_t outer = 1, inner = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= x.dim(a);
    for (std::size_t a = axis + 1; a < x.rank(); ++a) inner *= x.dim(a);
    const std::size_t len = x.dim(axis);
    std::vector<T> out(x.size());
    std::vector<T> mx(inner), den(inner);
    const T* xs = x.ptr();
    for (std::size_t o = 0; o < outer; ++o) {
        const std::size_t base = o * len * inner;
        std::copy_n(xs + base, inner, mx.begin());
        for (std::size_t k = 1; k < len; ++k)
            for (std::size_t i = 0; i < inner; ++i) mx[i] = std::max(mx[i], xs[base + k * inner + i]);
        std::fill(den.begin(), den.end(), T(0));
        for (std::size_t k = 0; k < len; ++k)
            for (std::size_t i = 0; i < inner; ++i) {
                const T e = std::exp(xs[base + k * inner + i] - mx[i]);
                out[base + k * inner + i] = e;
                den[i] += e;
            }
        for (std::size_t k = 0; k < len; ++k)
            for (std::size_t i = 0; i < inner; ++i) out[base + k * inner + i] /= den[i];
    }
    auto xn = x.node_ptr();
    return Tensor<T>::make_result(x.shape(), std::move(out), {x}, [xn, outer, len, inner](auto& self) {
        auto& gx = xn->ensure_grad();
        std::vector<T> dot(inner);
        for (std::size_t o = 0; o < outer; ++o) {
            const std::size_t base = o * len * inner;
            std::fill(dot.begin(), dot.end(), T(0));
            for (std::size_t k = 0; k < len; ++k)
                for (std::size_t i = 0; i < inner; ++i)
                    dot[i] += self.grad[base + k * inner + i] * self.data[base + k * inner + i];
            for (std::size_t k = 0; k < len; ++k)
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t e = base + k * inner + i;
                    gx[e] += self.data[e] * (self.grad[e] - dot[i]);
                }
        }
    });
}

namespace detail {

// Index map of pixel shuffle: input (n, c*r*r + dx*r + dy, h, w) -> output (n, c, h*r+dx, w*r+dy).
template <class F>
void for_each_shuffle(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t r, F&& f) {
    const std::size_t rh = h * r, rw = w * r;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t dx = 0; dx < r; ++dx)
                for (std::size_t dy = 0; dy < r; ++dy) {
                    const std::size_t in_base = ((i * c * r * r) + ch * r * r + dx * r + dy) * h * w;
                    const std::size_t out_base = (i * c + ch) * rh * rw;
                    for (std::size_t y = 0; y < h; ++y)
                        for (std::size_t x = 0; x < w; ++x)
                            f(in_base + y * w + x, out_base + (y * r + dx) * rw + x * r + dy);
                }
}

}  // namespace detail

/// (N, C*r*r, H, W) -> (N, C, rH, rW). Channel c*r*r + dx*r + dy lands at sub-position (dx,dy).
template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, std::size_t r) {
    detail::require(x.rank() == 4, "pixel_shuffle: expects NCHW");
    detail::require(r >= 1 && x.dim(1) % (r * r) == 0,
                    "pixel_shuffle: channels " + std::to_string(x.dim(1)) + " not divisible by r^2=" +
                        std::to_string(r * r));
    const std::size_t n = x.dim(0), c = x.dim(1) / (r * r), h = x.dim(2), w = x.dim(3);
    std::vector<T> out(x.size());
    const T* src = x.ptr();
    detail::for_each_shuffle(n, c, h, w, r, [&](std::size_t i, std::size_t o) { out[o] = src[i]; });
    auto xn = x.node_ptr();
    return Tensor<T>::make_result({n, c, h * r, w * r}, std::move(out), {x}, [xn, n, c, h, w, r](auto& self) {
        auto& g = xn->ensure_grad();
        detail::for_each_shuffle(n, c, h, w, r, [&](std::size_t i, std::size_t o) { g[i] += self.grad[o]; });
    });
}

/// Inverse of pixel_shuffle: (N, C, rH, rW) -> (N, C*r*r, H, W).
template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, std::size_t r) {
    detail::require(x.rank() == 4, "pixel_unshuffle: expects NCHW");
    detail::require(r >= 1 && x.dim(2) % r == 0 && x.dim(3) % r == 0,
                    "pixel_unshuffle: spatial dims not divisible by r");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2) / r, w = x.dim(3) / r;
    std::vector<T> out(x.size());
    const T* src = x.ptr();
    detail::for_each_shuffle(n, c, h, w, r, [&](std::size_t i, std::size_t o) { out[i] = src[o]; });
    auto xn = x.node_ptr();
    return Tensor<T>::make_result({n, c * r * r, h, w}, std::move(out), {x}, [xn, n, c, h, w, r](auto& self) {
        auto& g = xn->ensure_grad();
        detail::for_each_shuffle(n, c, h, w, r, [&](std::size_t i, std::size_t o) { g[o] += self.grad[i]; });
    });
}

/// Mean absolute error. The subgradient at zero difference is 0.
template <class T>
Tensor<T> l1_loss(const Tensor<T>& x, const Tensor<T>& y) {
    detail::require(x.shape() == y.shape(), "l1_loss: " + shape_str(x.shape()) + " vs " + shape_str(y.shape()));
    detail::require(x.size() > 0, "l1_loss: empty input");
    const std::size_t count = x.size();
    T acc = 0;
    for (std::size_t i = 0; i < count; ++i) acc += std::abs(x.data()[i] - y.data()[i]);
    auto xn = x.node_ptr(), yn = y.node_ptr();
    return Tensor<T>::make_result({1}, {acc / static_cast<T>(count)}, {x, y}, [xn, yn, count](auto& self) {
        const T s = self.grad[0] / static_cast<T>(count);
        auto* gx = grad_sink(*xn);
        auto* gy = grad_sink(*yn);
        for (std::size_t i = 0; i < count; ++i) {
            const T d = xn->data[i] - yn->data[i];
            const T sg = d > T(0) ? s : (d < T(0) ? -s : T(0));
            if (gx) (*gx)[i] += sg;
            if (gy) (*gy)[i] -= sg;
        }
    });
}

}  // namespace lfmdfn::ad
