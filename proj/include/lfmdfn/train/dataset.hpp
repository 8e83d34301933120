#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lfmdfn/lf/color.hpp"
#include "lfmdfn/lf/io.hpp"
#include "lfmdfn/lf/light_field.hpp"
#include "lfmdfn/lf/resample.hpp"
#include "lfmdfn/lf/transform.hpp"
#include "lfmdfn/train/config.hpp"

namespace lfmdfn::train {

struct DatasetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kAngular = 7;

/// A ground-truth light field with its degraded counterpart, both luma only.
struct LfPair {
    LightField4D lr;
    LightField4D hr;
};

/// Crops the spatial extent to the largest multiple of r (from the top-left
/// corner) and degrades it with the antialiased cubic kernel.
inline LfPair make_pair(const LightField4D& hr, std::size_t r) {
    if (r == 0) throw ShapeError("make_pair: r must be >= 1");
    const std::size_t X = hr.X() / r * r, Y = hr.Y() / r * r;
    if (X == 0 || Y == 0)
        throw ShapeError("make_pair: spatial size " + std::to_string(hr.X()) + "x" + std::to_string(hr.Y()) +
                         " is smaller than r=" + std::to_string(r));
    LfPair p;
    p.hr = (X == hr.X() && Y == hr.Y()) ? hr : crop(hr, 0, hr.U(), 0, hr.V(), 0, X, 0, Y);
    p.lr = bicubic_downsample(p.hr, r);
    return p;
}

/// Luma of a 1- or 3-channel light field.
inline LightField4D to_luma(const LightField4D& lf) {
    if (lf.C() == 1) return lf;
    if (lf.C() == 3) return luma(lf);
    throw ShapeError("expected a 1- or 3-channel light field, got C=" + std::to_string(lf.C()));
}

/// 64-bit FNV-1a over the dims and payload.
inline std::uint64_t content_hash(const LightField4D& lf) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) h = (h ^ b[i]) * 1099511628211ull;
    };
    const auto& d = lf.dims();
    const std::uint64_t dims[5] = {d.U, d.V, d.X, d.Y, d.C};
    feed(dims, sizeof dims);
    feed(lf.data().data(), lf.data().size() * sizeof(float));
    return h;
}

/// The directory used for cached degradations: explicit setting, then $LFMDFN_CACHE.
inline fs::path resolve_cache_dir(const std::string& configured) {
    if (!configured.empty()) return configured;
    if (const char* env = std::getenv("LFMDFN_CACHE"); env && *env) return env;
    return {};
}

/// make_pair with an on-disk cache of the degraded field, keyed by content hash and r.
inline LfPair make_pair_cached(const LightField4D& hr, std::size_t r, const fs::path& cache_dir) {
    if (cache_dir.empty()) return make_pair(hr, r);
    std::ostringstream key;
    key << std::hex << content_hash(hr) << "_x" << std::dec << r << ".lf";
    const fs::path file = cache_dir / key.str();
    const std::size_t X = hr.X() / r * r, Y = hr.Y() / r * r;
    if (fs::exists(file)) {
        LfPair p;
        p.lr = io::load_raw(file);
        p.hr = (X == hr.X() && Y == hr.Y()) ? hr : crop(hr, 0, hr.U(), 0, hr.V(), 0, X, 0, Y);
        if (p.lr.dims().U == hr.U() && p.lr.V() == hr.V() && p.lr.X() * r == X && p.lr.Y() * r == Y) return p;
    }
    LfPair p = make_pair(hr, r);
    std::error_code ec;
    fs::create_directories(cache_dir, ec);
    // A cache that cannot be written is not fatal.
    try {
        const fs::path tmp = file.string() + ".tmp";
        io::save_raw(p.lr, tmp);
        fs::rename(tmp, file, ec);
    } catch (const std::exception&) {
    }
    return p;
}

struct DatasetItem {
    std::string name;
    fs::path source;
    LfPair pair;
};

/// Indexed, validated light field collection (7x7 angular, luma, degraded at r).
struct Dataset {
    std::size_t r = 2;
    std::vector<DatasetItem> items;
    std::size_t size() const { return items.size(); }
};

struct IngestOptions {
    std::size_t r = 2;
    fs::path cache_dir;
    io::LoadOptions load;
};

/// Entries of `root` that look like light fields, in name order: raw files
/// (*.lf), grid images (*.png), and view directories (containing view_00_00.png).
inline std::vector<fs::path> list_light_fields(const fs::path& root) {
    if (!fs::is_directory(root)) throw DatasetError("dataset root is not a directory: " + root.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(root)) {
        const auto& p = e.path();
        if (e.is_directory()) {
            if (fs::exists(p / io::view_filename(0, 0))) out.push_back(p);
        } else if (p.extension() == ".lf" || p.extension() == ".png") {
            out.push_back(p);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Loads one light field and brings it into training form: luma, 7x7 centre views.
inline LightField4D prepare_light_field(const fs::path& path, const io::LoadOptions& load = {}) {
    LightField4D lf = io::load_lf(path, load);
    if (lf.U() < kAngular || lf.V() < kAngular)
        throw DatasetError(path.string() + ": angular resolution " + std::to_string(lf.U()) + "x" +
                           std::to_string(lf.V()) + " is below the required 7x7");
    return to_luma(center_crop_angular(lf, kAngular));
}

inline Dataset ingest_paths(const std::vector<fs::path>& paths, const IngestOptions& opt) {
    Dataset ds;
    ds.r = opt.r;
    for (const auto& p : paths) {
        LightField4D hr;
        try {
            hr = prepare_light_field(p, opt.load);
        } catch (const DatasetError&) {
            throw;
        } catch (const std::exception& e) {
            throw DatasetError("cannot load light field " + p.string() + ": " + e.what());
        }
        ds.items.push_back({p.stem().string(), p, make_pair_cached(hr, opt.r, opt.cache_dir)});
    }
    return ds;
}

inline Dataset ingest_dataset(const fs::path& root, const IngestOptions& opt) {
    if (!fs::exists(root)) throw DatasetError("dataset root does not exist: " + root.string());
    auto paths = list_light_fields(root);
    if (paths.empty()) throw DatasetError("no light fields found in " + root.string());
    return ingest_paths(paths, opt);
}

// ---------------------------------------------------------------------------
// Patch sampling

struct PatchSample {
    LightField4D lr;  // (7,7,crop,crop)
    LightField4D hr;  // (7,7,r*crop,r*crop)
    std::size_t source = 0;
    std::size_t x0 = 0, y0 = 0;  // LR crop origin; the HR origin is r*(x0,y0)
    LfTransform transform;
};

/// Seed of the sampling stream for one step; depends only on (seed, step) so
/// a resumed run draws exactly the batches an uninterrupted run would.
inline std::uint64_t step_seed(std::uint64_t seed, std::uint64_t step) {
    std::uint64_t z = seed * 0x9e3779b97f4a7c15ull + step + 0x632be59bd9b4e019ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline PatchSample cut_patch(const Dataset& ds, std::size_t index, std::size_t x0, std::size_t y0, std::size_t crop_size,
                             const LfTransform& t) {
    const auto& pr = ds.items.at(index).pair;
    const std::size_t r = ds.r;
    PatchSample s;
    s.source = index;
    s.x0 = x0;
    s.y0 = y0;
    s.transform = t;
    s.lr = apply_transform(crop(pr.lr, 0, pr.lr.U(), 0, pr.lr.V(), x0, crop_size, y0, crop_size), t);
    s.hr = apply_transform(crop(pr.hr, 0, pr.hr.U(), 0, pr.hr.V(), r * x0, r * crop_size, r * y0, r * crop_size), t);
    return s;
}

/// Batch for a given step: uniform light field, uniform LR crop origin, and a
/// uniform element of the 16-transform group when augmenting.
inline std::vector<PatchSample> sample_batch(const Dataset& ds, const TrainConfig& cfg, std::uint64_t step) {
    if (ds.items.empty()) throw DatasetError("sample_batch: empty dataset");
    for (const auto& it : ds.items)
        if (it.pair.lr.X() < cfg.crop_size || it.pair.lr.Y() < cfg.crop_size)
            throw DatasetError(it.name + ": LR spatial size " + std::to_string(it.pair.lr.X()) + "x" +
                               std::to_string(it.pair.lr.Y()) + " is smaller than crop_size " +
                               std::to_string(cfg.crop_size));
    std::mt19937_64 rng(step_seed(cfg.seed, step));
    // Draws are taken as raw 64-bit words so the stream does not depend on
    // library-specific distribution implementations.
    auto uniform = [&rng](std::size_t n) { return static_cast<std::size_t>(rng() % n); };
    const auto group = LfTransform::all();
    std::vector<PatchSample> batch;
    batch.reserve(cfg.batch_size);
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const std::size_t idx = uniform(ds.size());
        const auto& lr = ds.items[idx].pair.lr;
        const std::size_t x0 = uniform(lr.X() - cfg.crop_size + 1);
        const std::size_t y0 = uniform(lr.Y() - cfg.crop_size + 1);
        const LfTransform t = cfg.augment ? group[uniform(group.size())] : LfTransform{};
        batch.push_back(cut_patch(ds, idx, x0, y0, cfg.crop_size, t));
    }
    return batch;
}

}  // namespace lfmdfn::train
