#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <png.h>

#include "lfmdfn/lf/light_field.hpp"

// Light field file formats.
//
// Raw (".lf"): little-endian
//     "LF4D" | u32 version=1 | u32 U,V,X,Y,C | float32[U*V*X*Y*C] in (u,v,x,y,c) order
// View directory: one 8-bit PNG per view named view_{u:02}_{v:02}.png
// Grid PNG: a single (U*X) x (V*Y) image, view (u,v) at rows [u*X,(u+1)*X), cols [v*Y,(v+1)*Y)

namespace lfmdfn {

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace io {

inline constexpr std::uint32_t kRawVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "raw I/O assumes a little-endian host");

inline void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

inline std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw FormatError("unexpected end of file");
    return v;
}

inline float to_unit(std::uint8_t v) { return static_cast<float>(v) / 255.0f; }
inline std::uint8_t to_byte(float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace detail

/// 8-bit PNG read into [0,1]; gray stays 1 channel, anything with color becomes RGB.
inline Image2D read_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        throw IoError("cannot read PNG " + path.string() + ": " + image.message);
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        throw IoError("cannot decode PNG " + path.string() + ": " + image.message);
    }
    Image2D img(image.height, image.width, gray ? 1 : 3);
    std::transform(buf.begin(), buf.end(), img.data.begin(), detail::to_unit);
    return img;
}

inline void write_png(const Image2D& img, const std::filesystem::path& path) {
    if (img.channels != 1 && img.channels != 3)
        throw FormatError("PNG export supports 1 or 3 channels, got " + std::to_string(img.channels));
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.cols);
    image.height = static_cast<png_uint_32>(img.rows);
    image.format = img.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(img.data.size());
    std::transform(img.data.begin(), img.data.end(), buf.begin(), detail::to_byte);
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, buf.data(), 0, nullptr))
        throw IoError("cannot write PNG " + path.string() + ": " + image.message);
}

inline void save_raw(const LightField4D& lf, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    os.write("LF4D", 4);
    detail::write_u32(os, kRawVersion);
    const auto& d = lf.dims();
    for (auto e : {d.U, d.V, d.X, d.Y, d.C}) detail::write_u32(os, static_cast<std::uint32_t>(e));
    os.write(reinterpret_cast<const char*>(lf.data().data()), static_cast<std::streamsize>(lf.data().size_bytes()));
    if (!os) throw IoError("write failed for " + path.string());
}

inline LightField4D load_raw(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, "LF4D", 4) != 0)
        throw FormatError(path.string() + ": bad magic, expected LF4D");
    const auto version = detail::read_u32(is);
    if (version != kRawVersion) throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
    LfDims d;
    d.U = detail::read_u32(is);
    d.V = detail::read_u32(is);
    d.X = detail::read_u32(is);
    d.Y = detail::read_u32(is);
    d.C = detail::read_u32(is);
    if (d.U == 0 || d.V == 0 || d.X == 0 || d.Y == 0 || d.C == 0)
        throw FormatError(path.string() + ": zero extent in header " + d.str());
    std::vector<float> data(d.count());
    if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float))))
        throw FormatError(path.string() + ": payload shorter than header dims " + d.str());
    return LightField4D(d, std::move(data));
}

/// Tiles all views into one (U*X) x (V*Y) image.
inline Image2D to_grid_image(const LightField4D& lf) {
    const auto& d = lf.dims();
    Image2D img(d.U * d.X, d.V * d.Y, d.C);
    for (std::size_t u = 0; u < d.U; ++u)
        for (std::size_t v = 0; v < d.V; ++v)
            for (std::size_t x = 0; x < d.X; ++x)
                for (std::size_t y = 0; y < d.Y; ++y)
                    for (std::size_t c = 0; c < d.C; ++c) img.at(u * d.X + x, v * d.Y + y, c) = lf.at(u, v, x, y, c);
    return img;
}

inline LightField4D from_grid_image(const Image2D& img, std::size_t U, std::size_t V) {
    if (U == 0 || V == 0 || img.rows % U != 0 || img.cols % V != 0)
        throw FormatError("grid image " + std::to_string(img.rows) + "x" + std::to_string(img.cols) +
                          " is not divisible into " + std::to_string(U) + "x" + std::to_string(V) + " views");
    LightField4D lf({U, V, img.rows / U, img.cols / V, img.channels});
    const auto& d = lf.dims();
    for (std::size_t u = 0; u < d.U; ++u)
        for (std::size_t v = 0; v < d.V; ++v)
            for (std::size_t x = 0; x < d.X; ++x)
                for (std::size_t y = 0; y < d.Y; ++y)
                    for (std::size_t c = 0; c < d.C; ++c) lf.at(u, v, x, y, c) = img.at(u * d.X + x, v * d.Y + y, c);
    return lf;
}

inline std::string view_filename(std::size_t u, std::size_t v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "view_%02zu_%02zu.png", u, v);
    return buf;
}

inline void save_view_dir(const LightField4D& lf, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
    for (std::size_t u = 0; u < lf.U(); ++u)
        for (std::size_t v = 0; v < lf.V(); ++v) write_png(view_sai(lf, u, v), dir / view_filename(u, v));
}

inline LightField4D load_view_dir(const std::filesystem::path& dir) {
    static const std::regex pattern(R"(view_(\d{2})_(\d{2})\.png)");
    std::set<std::pair<std::size_t, std::size_t>> present;
    std::size_t U = 0, V = 0;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (!std::regex_match(name, m, pattern)) continue;
        const std::size_t u = std::stoul(m[1]), v = std::stoul(m[2]);
        present.insert({u, v});
        U = std::max(U, u + 1);
        V = std::max(V, v + 1);
    }
    if (present.empty()) throw FormatError(dir.string() + ": no view_UU_VV.png files");
    for (std::size_t u = 0; u < U; ++u)
        for (std::size_t v = 0; v < V; ++v)
            if (!present.count({u, v}))
                throw FormatError(dir.string() + ": missing view (" + std::to_string(u) + "," + std::to_string(v) +
                                  ") " + view_filename(u, v));
    LightField4D lf;
    for (std::size_t u = 0; u < U; ++u)
        for (std::size_t v = 0; v < V; ++v) {
            const Image2D img = read_png(dir / view_filename(u, v));
            if (u == 0 && v == 0) lf = LightField4D({U, V, img.rows, img.cols, img.channels});
            if (img.rows != lf.X() || img.cols != lf.Y() || img.channels != lf.C())
                throw FormatError(dir.string() + ": view " + view_filename(u, v) + " has size " +
                                  std::to_string(img.rows) + "x" + std::to_string(img.cols) + "x" +
                                  std::to_string(img.channels) + ", expected " + std::to_string(lf.X()) + "x" +
                                  std::to_string(lf.Y()) + "x" + std::to_string(lf.C()));
            std::copy(img.data.begin(), img.data.end(), lf.data().begin() + lf.index(u, v, 0, 0));
        }
    return lf;
}

struct LoadOptions {
    std::size_t grid_u = 7;  // angular grid of a single-image (.png) light field
    std::size_t grid_v = 7;
};

/// Dispatches on the path: directory -> view PNGs, *.png -> grid image, anything else -> raw.
inline LightField4D load_lf(const std::filesystem::path& path, const LoadOptions& opts = {}) {
    if (!std::filesystem::exists(path)) throw IoError("no such light field: " + path.string());
    if (std::filesystem::is_directory(path)) return load_view_dir(path);
    if (path.extension() == ".png") return from_grid_image(read_png(path), opts.grid_u, opts.grid_v);
    return load_raw(path);
}

/// Same dispatch as load_lf; a path without extension is written as a view directory.
inline void save_lf(const LightField4D& lf, const std::filesystem::path& path) {
    if (path.extension() == ".png") return write_png(to_grid_image(lf), path);
    if (path.extension().empty() || std::filesystem::is_directory(path)) return save_view_dir(lf, path);
    save_raw(lf, path);
}

}  // namespace io

}  // namespace lfmdfn
