#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "lfmdfn/ad/params.hpp"
#include "lfmdfn/util/kv.hpp"

// Checkpoint layout (little-endian):
//   "MDFNCKPT"  u32 version  u32 n  config text (n bytes, key=value lines)
//   u64 step  u32 count
//   count x { u32 len, name, u32 rank, rank x u32 extent, float32 payload }
//   u8 has_optimizer; if 1: u64 adam_step, then per parameter (same order) m, v as float32

namespace lfmdfn::train {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr char kCheckpointMagic[8] = {'M', 'D', 'F', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    KeyValues config;
    std::uint64_t step = 0;
    ad::ParamStore<float> params;
    std::optional<ad::AdamState<float>> adam;
};

namespace detail {

template <class V>
void put(std::ostream& os, V v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class V>
V get(std::istream& is, const char* what) {
    V v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CheckpointError(std::string("truncated checkpoint reading ") + what);
    return v;
}

inline void put_floats(std::ostream& os, const std::vector<float>& v) {
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
}

inline std::vector<float> get_floats(std::istream& is, std::size_t n, const std::string& what) {
    std::vector<float> v(n);
    if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(float))))
        throw CheckpointError("truncated checkpoint reading " + what);
    return v;
}

inline std::string get_string(std::istream& is, std::size_t n, const char* what) {
    std::string s(n, '\0');
    if (n && !is.read(s.data(), static_cast<std::streamsize>(n))) throw CheckpointError(std::string("truncated checkpoint reading ") + what);
    return s;
}

}  // namespace detail

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
        os.write(kCheckpointMagic, sizeof kCheckpointMagic);
        detail::put<std::uint32_t>(os, kCheckpointVersion);
        const std::string cfg = kv::dump(ck.config);
        detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(cfg.size()));
        os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
        detail::put<std::uint64_t>(os, ck.step);
        detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ck.params.size()));
        for (const auto& [name, t] : ck.params) {
            detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
            for (auto e : t.shape()) detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(e));
            detail::put_floats(os, t.data());
        }
        detail::put<std::uint8_t>(os, ck.adam ? 1 : 0);
        if (ck.adam) {
            detail::put<std::uint64_t>(os, ck.adam->step);
            for (const auto& [name, t] : ck.params) {
                for (const auto* moments : {&ck.adam->m, &ck.adam->v}) {
                    auto it = moments->find(name);
                    detail::put_floats(os, it == moments->end() ? std::vector<float>(t.size(), 0.0f) : it->second);
                }
            }
        }
        if (!os) throw CheckpointError("failed writing checkpoint " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw CheckpointError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot open checkpoint " + path.string());
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw CheckpointError(path.string() + " is not an MDFN checkpoint (bad magic)");
    const auto version = detail::get<std::uint32_t>(is, "version");
    if (version != kCheckpointVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    ck.config = kv::parse(detail::get_string(is, detail::get<std::uint32_t>(is, "config length"), "config"));
    ck.step = detail::get<std::uint64_t>(is, "step");
    const auto count = detail::get<std::uint32_t>(is, "parameter count");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::string name = detail::get_string(is, detail::get<std::uint32_t>(is, "name length"), "name");
        const auto rank = detail::get<std::uint32_t>(is, "rank");
        if (rank > 8) throw CheckpointError("implausible rank for " + name);
        ad::Shape shape(rank);
        for (auto& e : shape) e = detail::get<std::uint32_t>(is, "extent");
        ck.params.add(name, ad::Tensor<float>(shape, detail::get_floats(is, ad::numel(shape), name)));
    }
    if (detail::get<std::uint8_t>(is, "optimizer flag")) {
        ad::AdamState<float> st;
        st.step = detail::get<std::uint64_t>(is, "adam step");
        for (const auto& [name, t] : ck.params) {
            st.m[name] = detail::get_floats(is, t.size(), name + " (m)");
            st.v[name] = detail::get_floats(is, t.size(), name + " (v)");
        }
        ck.adam = std::move(st);
    }
    return ck;
}

/// Bitwise equality of names, shapes and values.
inline bool same_parameters(const ad::ParamStore<float>& a, const ad::ParamStore<float>& b) {
    if (a.names() != b.names()) return false;
    for (const auto& [name, t] : a) {
        const auto& u = b.at(name);
        if (t.shape() != u.shape() || std::memcmp(t.ptr(), u.ptr(), t.size() * sizeof(float)) != 0) return false;
    }
    return true;
}

}  // namespace lfmdfn::train
