#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfmdfn {

struct RangeError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Extents of a light field: angular (u,v), spatial (x,y), channels.
struct LfDims {
    std::size_t U = 1, V = 1, X = 1, Y = 1, C = 1;

    std::size_t count() const { return U * V * X * Y * C; }
    bool operator==(const LfDims&) const = default;
    std::string str() const {
        return "(" + std::to_string(U) + "," + std::to_string(V) + "," + std::to_string(X) + "," +
               std::to_string(Y) + "," + std::to_string(C) + ")";
    }
};

/// A 2D image, row-major (row, col, channel).
struct Image2D {
    std::size_t rows = 0, cols = 0, channels = 1;
    std::vector<float> data;

    Image2D() = default;
    Image2D(std::size_t r, std::size_t c, std::size_t ch = 1, float fill = 0.0f)
        : rows(r), cols(c), channels(ch), data(r * c * ch, fill) {}

    float& at(std::size_t r, std::size_t c, std::size_t ch = 0) { return data[(r * cols + c) * channels + ch]; }
    float at(std::size_t r, std::size_t c, std::size_t ch = 0) const {
        return data[(r * cols + c) * channels + ch];
    }
    bool same_shape(const Image2D& o) const { return rows == o.rows && cols == o.cols && channels == o.channels; }
};

/// Dense 4D light field I(u,v,x,y) with interleaved channels.
///
/// Storage is row-major in (u,v,x,y,c). The object is a plain value; every
/// operation below returns a new value and leaves its inputs untouched.
class LightField4D {
public:
    LightField4D() = default;

    explicit LightField4D(LfDims dims, float fill = 0.0f) : dims_(validated(dims)), data_(dims.count(), fill) {}

    LightField4D(LfDims dims, std::vector<float> data) : dims_(validated(dims)), data_(std::move(data)) {
        if (data_.size() != dims_.count())
            throw ShapeError("light field buffer has " + std::to_string(data_.size()) + " values, dims " +
                             dims_.str() + " need " + std::to_string(dims_.count()));
    }

    const LfDims& dims() const { return dims_; }
    std::size_t U() const { return dims_.U; }
    std::size_t V() const { return dims_.V; }
    std::size_t X() const { return dims_.X; }
    std::size_t Y() const { return dims_.Y; }
    std::size_t C() const { return dims_.C; }

    std::size_t index(std::size_t u, std::size_t v, std::size_t x, std::size_t y, std::size_t c = 0) const {
        return (((u * dims_.V + v) * dims_.X + x) * dims_.Y + y) * dims_.C + c;
    }
    float& at(std::size_t u, std::size_t v, std::size_t x, std::size_t y, std::size_t c = 0) {
        return data_[index(u, v, x, y, c)];
    }
    float at(std::size_t u, std::size_t v, std::size_t x, std::size_t y, std::size_t c = 0) const {
        return data_[index(u, v, x, y, c)];
    }

    std::span<const float> data() const { return data_; }
    std::span<float> data() { return data_; }
    const std::vector<float>& buffer() const { return data_; }

    bool operator==(const LightField4D&) const = default;

private:
    static LfDims validated(LfDims d) {
        if (d.U == 0 || d.V == 0 || d.X == 0 || d.Y == 0 || d.C == 0)
            throw ShapeError("light field dims must all be >= 1, got " + d.str());
        return d;
    }

    LfDims dims_;
    std::vector<float> data_;
};

/// The four 2D re-foldings of a light field.
enum class PlaneKind { SAI, MicroLens, EpiHorizontal, EpiVertical };

inline const char* to_string(PlaneKind k) {
    switch (k) {
        case PlaneKind::SAI: return "sai";
        case PlaneKind::MicroLens: return "microlens";
        case PlaneKind::EpiHorizontal: return "epi_h";
        case PlaneKind::EpiVertical: return "epi_v";
    }
    return "?";
}

inline constexpr std::array<PlaneKind, 4> kAllPlaneKinds{PlaneKind::SAI, PlaneKind::MicroLens,
                                                         PlaneKind::EpiHorizontal, PlaneKind::EpiVertical};

namespace detail {
inline void check_index(std::size_t i, std::size_t n, const char* axis) {
    if (i >= n)
        throw RangeError(std::string(axis) + " index " + std::to_string(i) + " out of range [0," + std::to_string(n) +
                         ")");
}
}  // namespace detail

/// Sub-aperture image I(u,:,:): (X,Y,C).
inline Image2D view_sai(const LightField4D& lf, std::size_t u, std::size_t v) {
    detail::check_index(u, lf.U(), "u");
    detail::check_index(v, lf.V(), "v");
    Image2D img(lf.X(), lf.Y(), lf.C());
    const auto src = lf.data().subspan(lf.index(u, v, 0, 0), img.data.size());
    std::copy(src.begin(), src.end(), img.data.begin());
    return img;
}

/// Micro-lens image I(:,:,x,y): (U,V,C).
inline Image2D view_microlens(const LightField4D& lf, std::size_t x, std::size_t y) {
    detail::check_index(x, lf.X(), "x");
    detail::check_index(y, lf.Y(), "y");
    Image2D img(lf.U(), lf.V(), lf.C());
    for (std::size_t u = 0; u < lf.U(); ++u)
        for (std::size_t v = 0; v < lf.V(); ++v)
            for (std::size_t c = 0; c < lf.C(); ++c) img.at(u, v, c) = lf.at(u, v, x, y, c);
    return img;
}

/// Epipolar plane image. EpiHorizontal fixes (u=a, x=b) and returns a (V,Y)
/// image; EpiVertical fixes (v=a, y=b) and returns a (U,X) image. Rows are the
/// angular axis, columns the spatial axis.
inline Image2D view_epi(const LightField4D& lf, PlaneKind kind, std::size_t a, std::size_t b) {
    if (kind == PlaneKind::EpiHorizontal) {
        detail::check_index(a, lf.U(), "u");
        detail::check_index(b, lf.X(), "x");
        Image2D img(lf.V(), lf.Y(), lf.C());
        for (std::size_t v = 0; v < lf.V(); ++v)
            for (std::size_t y = 0; y < lf.Y(); ++y)
                for (std::size_t c = 0; c < lf.C(); ++c) img.at(v, y, c) = lf.at(a, v, b, y, c);
        return img;
    }
    if (kind == PlaneKind::EpiVertical) {
        detail::check_index(a, lf.V(), "v");
        detail::check_index(b, lf.Y(), "y");
        Image2D img(lf.U(), lf.X(), lf.C());
        for (std::size_t u = 0; u < lf.U(); ++u)
            for (std::size_t x = 0; x < lf.X(); ++x)
                for (std::size_t c = 0; c < lf.C(); ++c) img.at(u, x, c) = lf.at(u, a, x, b, c);
        return img;
    }
    throw std::invalid_argument("view_epi: kind must be EpiHorizontal or EpiVertical");
}

/// A batch of channel-first images: (count, channels, rows, cols), tagged
/// with the folding that produced it.
struct BatchedImages {
    PlaneKind kind = PlaneKind::SAI;
    std::size_t count = 0, channels = 0, rows = 0, cols = 0;
    std::vector<float> data;

    float& at(std::size_t b, std::size_t c, std::size_t r, std::size_t q) {
        return data[((b * channels + c) * rows + r) * cols + q];
    }
    float at(std::size_t b, std::size_t c, std::size_t r, std::size_t q) const {
        return data[((b * channels + c) * rows + r) * cols + q];
    }
};

/// Batch and pixel coordinates of element (u,v,x,y) in a folding.
///
///   SAI           batch u*V+v, pixel (x,y)
///   MicroLens     batch x*Y+y, pixel (u,v)
///   EpiHorizontal batch u*X+x, pixel (v,y)
///   EpiVertical   batch v*Y+y, pixel (u,x)
struct PlaneCoord {
    std::size_t batch, row, col;
};

inline PlaneCoord plane_coord(PlaneKind kind, const LfDims& d, std::size_t u, std::size_t v, std::size_t x,
                              std::size_t y) {
    switch (kind) {
        case PlaneKind::SAI: return {u * d.V + v, x, y};
        case PlaneKind::MicroLens: return {x * d.Y + y, u, v};
        case PlaneKind::EpiHorizontal: return {u * d.X + x, v, y};
        case PlaneKind::EpiVertical: return {v * d.Y + y, u, x};
    }
    throw std::invalid_argument("unknown plane kind");
}

/// (count, rows, cols) of the folding of a light field with dims `d`.
inline std::array<std::size_t, 3> plane_layout(PlaneKind kind, const LfDims& d) {
    switch (kind) {
        case PlaneKind::SAI: return {d.U * d.V, d.X, d.Y};
        case PlaneKind::MicroLens: return {d.X * d.Y, d.U, d.V};
        case PlaneKind::EpiHorizontal: return {d.U * d.X, d.V, d.Y};
        case PlaneKind::EpiVertical: return {d.V * d.Y, d.U, d.X};
    }
    throw std::invalid_argument("unknown plane kind");
}

/// Refolds a light field into a batch of 2D images (see PlaneCoord for ordering).
inline BatchedImages fold_to_plane(const LightField4D& lf, PlaneKind kind) {
    const auto& d = lf.dims();
    const auto [count, rows, cols] = plane_layout(kind, d);
    BatchedImages b{kind, count, d.C, rows, cols, std::vector<float>(d.count())};
    for (std::size_t u = 0; u < d.U; ++u)
        for (std::size_t v = 0; v < d.V; ++v)
            for (std::size_t x = 0; x < d.X; ++x)
                for (std::size_t y = 0; y < d.Y; ++y) {
                    const auto pc = plane_coord(kind, d, u, v, x, y);
                    for (std::size_t c = 0; c < d.C; ++c) b.at(pc.batch, c, pc.row, pc.col) = lf.at(u, v, x, y, c);
                }
    return b;
}

/// Inverse of fold_to_plane. `dims` gives (U,V,X,Y); channels come from the batch.
inline LightField4D unfold_from_plane(const BatchedImages& b, PlaneKind kind, const LfDims& dims) {
    if (b.kind != kind)
        throw ShapeError(std::string("unfold_from_plane: batch was folded as ") + to_string(b.kind) + ", not " +
                         to_string(kind));
    LfDims d = dims;
    d.C = b.channels;
    const auto [count, rows, cols] = plane_layout(kind, d);
    if (b.count != count || b.rows != rows || b.cols != cols || b.data.size() != d.count())
        throw ShapeError(std::string("unfold_from_plane(") + to_string(kind) + "): batch " +
                         std::to_string(b.count) + "x(" + std::to_string(b.rows) + "," + std::to_string(b.cols) +
                         ") incompatible with dims " + d.str());
    LightField4D lf(d);
    for (std::size_t u = 0; u < d.U; ++u)
        for (std::size_t v = 0; v < d.V; ++v)
            for (std::size_t x = 0; x < d.X; ++x)
                for (std::size_t y = 0; y < d.Y; ++y) {
                    const auto pc = plane_coord(kind, d, u, v, x, y);
                    for (std::size_t c = 0; c < d.C; ++c) lf.at(u, v, x, y, c) = b.at(pc.batch, c, pc.row, pc.col);
                }
    return lf;
}

/// Channel `c` of a light field as a single-channel light field.
inline LightField4D extract_channel(const LightField4D& lf, std::size_t c) {
    detail::check_index(c, lf.C(), "channel");
    LfDims d = lf.dims();
    d.C = 1;
    LightField4D out(d);
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = lf.data()[i * lf.C() + c];
    return out;
}

/// Views [u0,u0+nu) x [v0,v0+nv), spatial [x0,x0+nx) x [y0,y0+ny).
inline LightField4D crop(const LightField4D& lf, std::size_t u0, std::size_t nu, std::size_t v0, std::size_t nv,
                         std::size_t x0, std::size_t nx, std::size_t y0, std::size_t ny) {
    if (u0 + nu > lf.U() || v0 + nv > lf.V() || x0 + nx > lf.X() || y0 + ny > lf.Y())
        throw RangeError("crop window exceeds light field dims " + lf.dims().str());
    LightField4D out({nu, nv, nx, ny, lf.C()});
    const std::size_t row = ny * lf.C();
    for (std::size_t u = 0; u < nu; ++u)
        for (std::size_t v = 0; v < nv; ++v)
            for (std::size_t x = 0; x < nx; ++x) {
                const auto src = lf.data().subspan(lf.index(u0 + u, v0 + v, x0 + x, y0), row);
                std::copy(src.begin(), src.end(), out.data().begin() + out.index(u, v, x, 0));
            }
    return out;
}

/// Central `n` x `n` angular views.
inline LightField4D center_crop_angular(const LightField4D& lf, std::size_t n) {
    if (lf.U() < n || lf.V() < n)
        throw ShapeError("angular resolution " + std::to_string(lf.U()) + "x" + std::to_string(lf.V()) +
                         " is below the required " + std::to_string(n) + "x" + std::to_string(n));
    return crop(lf, (lf.U() - n) / 2, n, (lf.V() - n) / 2, n, 0, lf.X(), 0, lf.Y());
}

}  // namespace lfmdfn
