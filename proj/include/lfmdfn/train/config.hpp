#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "lfmdfn/model/config.hpp"
#include "lfmdfn/util/kv.hpp"

namespace lfmdfn::train {

namespace fs = std::filesystem;

/// Training protocol. Serialized as key=value text together with the model keys.
struct TrainConfig {
    std::size_t crop_size = 24;  // LR crop per SAI; the HR crop is r times larger
    std::size_t batch_size = 22;
    std::size_t iterations = 1000;
    double lr = 1e-4;
    std::string schedule = "constant";  // constant | step
    std::size_t lr_step = 0;            // step schedule: decay every lr_step iterations
    double lr_gamma = 0.5;
    std::uint64_t seed = 1;
    bool augment = true;
    std::string dataset_root;
    std::size_t checkpoint_interval = 100;
    std::string out_dir = "run";
    std::string cache_dir;  // empty: fall back to $LFMDFN_CACHE, then no cache
    std::size_t grid_u = 7, grid_v = 7;
    model::MDFNConfig model;

    std::size_t r() const { return model.r; }

    double lr_at(std::size_t step) const {
        if (schedule == "step" && lr_step > 0)
            return lr * std::pow(lr_gamma, static_cast<double>((step - 1) / lr_step));
        return lr;
    }

    void validate() const {
        model.validate();
        if (crop_size == 0) throw ConfigError("crop_size must be >= 1");
        if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
        if (iterations == 0) throw ConfigError("iterations must be >= 1");
        if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
        if (schedule != "constant" && schedule != "step")
            throw ConfigError("schedule must be constant|step, got '" + schedule + "'");
        if (schedule == "step" && lr_step == 0) throw ConfigError("schedule=step needs lr_step >= 1");
        if (checkpoint_interval == 0) throw ConfigError("checkpoint_interval must be >= 1");
        if (crop_size < model.branch_kernel / 2 + 1) throw ConfigError("crop_size too small for the branch kernel");
    }

    KeyValues to_kv() const {
        KeyValues kvs = model.to_kv();
        kvs["crop_size"] = std::to_string(crop_size);
        kvs["batch_size"] = std::to_string(batch_size);
        kvs["iterations"] = std::to_string(iterations);
        kvs["lr"] = kv::fmt_double(lr);
        kvs["schedule"] = schedule;
        kvs["lr_step"] = std::to_string(lr_step);
        kvs["lr_gamma"] = kv::fmt_double(lr_gamma);
        kvs["train_seed"] = std::to_string(seed);
        kvs["augment"] = augment ? "true" : "false";
        kvs["dataset_root"] = dataset_root;
        kvs["checkpoint_interval"] = std::to_string(checkpoint_interval);
        kvs["out_dir"] = out_dir;
        kvs["cache_dir"] = cache_dir;
        kvs["grid_u"] = std::to_string(grid_u);
        kvs["grid_v"] = std::to_string(grid_v);
        return kvs;
    }

    /// `seed` seeds both sampling and initialization unless `train_seed` is given.
    static TrainConfig from_kv(const KeyValues& kvs) {
        TrainConfig c;
        c.model = model::MDFNConfig::from_kv(kvs);
        c.crop_size = kv::get_uint(kvs, "crop_size", c.crop_size);
        c.batch_size = kv::get_uint(kvs, "batch_size", c.batch_size);
        c.iterations = kv::get_uint(kvs, "iterations", c.iterations);
        c.lr = kv::get_double(kvs, "lr", c.lr);
        c.schedule = kv::get_string(kvs, "schedule", c.schedule);
        c.lr_step = kv::get_uint(kvs, "lr_step", c.lr_step);
        c.lr_gamma = kv::get_double(kvs, "lr_gamma", c.lr_gamma);
        c.seed = kv::get_uint(kvs, "train_seed", c.model.seed);
        c.augment = kv::get_bool(kvs, "augment", c.augment);
        c.dataset_root = kv::get_string(kvs, "dataset_root", c.dataset_root);
        c.checkpoint_interval = kv::get_uint(kvs, "checkpoint_interval", c.checkpoint_interval);
        c.out_dir = kv::get_string(kvs, "out_dir", c.out_dir);
        c.cache_dir = kv::get_string(kvs, "cache_dir", c.cache_dir);
        c.grid_u = kv::get_uint(kvs, "grid_u", c.grid_u);
        c.grid_v = kv::get_uint(kvs, "grid_v", c.grid_v);
        c.validate();
        return c;
    }

    static TrainConfig load(const fs::path& path) {
        auto kvs = kv::load(path);
        // Relative dataset/output paths are taken relative to the config file.
        const fs::path base = path.parent_path();
        for (const char* key : {"dataset_root", "out_dir", "cache_dir"}) {
            auto it = kvs.find(key);
            if (it != kvs.end() && !it->second.empty() && fs::path(it->second).is_relative())
                it->second = (base / it->second).lexically_normal().string();
        }
        return from_kv(kvs);
    }

    void set_seed(std::uint64_t s) {
        seed = s;
        model.seed = s;
    }
};

}  // namespace lfmdfn::train
