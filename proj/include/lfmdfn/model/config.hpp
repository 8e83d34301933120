#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfmdfn/lf/light_field.hpp"
#include "lfmdfn/util/kv.hpp"

namespace lfmdfn::model {

enum class Variant { Full, SAOnly, EPIOnly };
enum class Upsampler { DynamicFilter, Deconvolution };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::Full: return "full";
        case Variant::SAOnly: return "sa";
        case Variant::EPIOnly: return "epi";
    }
    return "?";
}

inline std::string to_string(Upsampler u) { return u == Upsampler::DynamicFilter ? "dynamic" : "deconv"; }

/// Architecture hyperparameters.
struct MDFNConfig {
    std::size_t n = 8;                  // fusion blocks
    std::size_t c = 80;                 // feature channels per block output
    std::size_t d = 5;                  // dynamic filter size (d x d angular taps)
    std::size_t r = 2;                  // upscale factor
    Variant variant = Variant::Full;
    Upsampler upsampler = Upsampler::DynamicFilter;
    std::size_t branch_kernel = 3;
    std::size_t dfb_mid_channels = 64;
    std::size_t rb_mid_channels = 32;
    std::uint64_t seed = 1;

    /// Plane foldings that get a convolution branch in each block.
    std::vector<PlaneKind> branches() const {
        switch (variant) {
            case Variant::SAOnly: return {PlaneKind::SAI, PlaneKind::MicroLens};
            case Variant::EPIOnly: return {PlaneKind::EpiHorizontal, PlaneKind::EpiVertical};
            case Variant::Full: break;
        }
        return {kAllPlaneKinds.begin(), kAllPlaneKinds.end()};
    }

    std::size_t branch_channels() const { return c / branches().size(); }

    void validate() const {
        if (n < 1) throw ConfigError("n must be >= 1");
        if (c == 0 || c % branches().size() != 0)
            throw ConfigError("c=" + std::to_string(c) + " must be a positive multiple of the " +
                              std::to_string(branches().size()) + " active branches");
        if (d == 0 || d % 2 == 0) throw ConfigError("d=" + std::to_string(d) + " must be odd");
        if (r != 2 && r != 4) throw ConfigError("r=" + std::to_string(r) + " must be 2 or 4");
        if (branch_kernel == 0 || branch_kernel % 2 == 0)
            throw ConfigError("branch_kernel=" + std::to_string(branch_kernel) + " must be odd");
        if (dfb_mid_channels == 0 || rb_mid_channels == 0) throw ConfigError("mid channel counts must be >= 1");
    }

    KeyValues to_kv() const {
        return {{"n", std::to_string(n)},
                {"c", std::to_string(c)},
                {"d", std::to_string(d)},
                {"r", std::to_string(r)},
                {"variant", to_string(variant)},
                {"upsampler", to_string(upsampler)},
                {"branch_kernel", std::to_string(branch_kernel)},
                {"dfb_mid_channels", std::to_string(dfb_mid_channels)},
                {"rb_mid_channels", std::to_string(rb_mid_channels)},
                {"seed", std::to_string(seed)}};
    }

    /// Reads the model keys of a key=value config; unknown keys are ignored.
    static MDFNConfig from_kv(const KeyValues& kvs) {
        MDFNConfig c;
        c.n = kv::get_uint(kvs, "n", c.n);
        c.c = kv::get_uint(kvs, "c", c.c);
        c.d = kv::get_uint(kvs, "d", c.d);
        c.r = kv::get_uint(kvs, "r", c.r);
        const auto variant = kv::get_string(kvs, "variant", "full");
        if (variant == "full") c.variant = Variant::Full;
        else if (variant == "sa") c.variant = Variant::SAOnly;
        else if (variant == "epi") c.variant = Variant::EPIOnly;
        else throw ConfigError("variant must be full|sa|epi, got '" + variant + "'");
        const auto up = kv::get_string(kvs, "upsampler", "dynamic");
        if (up == "dynamic") c.upsampler = Upsampler::DynamicFilter;
        else if (up == "deconv") c.upsampler = Upsampler::Deconvolution;
        else throw ConfigError("upsampler must be dynamic|deconv, got '" + up + "'");
        c.branch_kernel = kv::get_uint(kvs, "branch_kernel", c.branch_kernel);
        c.dfb_mid_channels = kv::get_uint(kvs, "dfb_mid_channels", c.dfb_mid_channels);
        c.rb_mid_channels = kv::get_uint(kvs, "rb_mid_channels", c.rb_mid_channels);
        c.seed = kv::get_uint(kvs, "seed", c.seed);
        c.validate();
        return c;
    }

    bool operator==(const MDFNConfig&) const = default;
};

}  // namespace lfmdfn::model
