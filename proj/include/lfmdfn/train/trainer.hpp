#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lfmdfn/model/mdfn.hpp"
#include "lfmdfn/train/checkpoint.hpp"
#include "lfmdfn/train/config.hpp"
#include "lfmdfn/train/dataset.hpp"

namespace lfmdfn::train {

struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Forward + L1 on every sample, gradients of the batch mean, one Adam step.
/// Returns the pre-step mean loss.
inline double train_step(ad::ParamStore<float>& params, ad::AdamState<float>& adam, const std::vector<PatchSample>& batch,
                         const model::MDFNConfig& cfg) {
    if (batch.empty()) throw TrainingError("train_step: empty batch");
    params.zero_grad();
    double total = 0;
    const float w = 1.0f / static_cast<float>(batch.size());
    for (const auto& s : batch) {
        auto loss = ad::l1_loss(model::forward(model::to_tensor(s.lr), params, cfg), model::to_tensor(s.hr));
        const double v = loss.item();
        if (!std::isfinite(v))
            throw TrainingError("non-finite loss " + std::to_string(v) + " on sample from source " +
                                std::to_string(s.source) + " at (" + std::to_string(s.x0) + "," +
                                std::to_string(s.y0) + ") " + s.transform.str());
        total += v;
        loss.backward_with({w});
    }
    ad::adam_step(params, adam);
    return total / static_cast<double>(batch.size());
}

inline std::string checkpoint_name(std::uint64_t step) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "ckpt_%08llu.mdfn", static_cast<unsigned long long>(step));
    return buf;
}

struct LoopOptions {
    std::filesystem::path resume{};  // checkpoint to continue from
    bool deterministic = false;    // elapsed_ms is logged as 0 so logs compare bitwise
    std::function<void(std::uint64_t step, double loss)> on_step{};
};

struct LoopResult {
    std::uint64_t first_step = 1, last_step = 0;
    std::vector<double> losses;  // steps run in this call
    std::filesystem::path final_checkpoint;
};

inline std::string loss_row(std::uint64_t step, double loss, double lr, long long elapsed_ms) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g,%lld", static_cast<unsigned long long>(step), loss, lr, elapsed_ms);
    return buf;
}

namespace detail {

// Keeps the header and rows with step <= last of an existing loss log.
inline std::vector<std::string> read_log_prefix(const std::filesystem::path& path, std::uint64_t last) {
    std::vector<std::string> rows;
    std::ifstream is(path);
    std::string line;
    bool header = true;
    while (std::getline(is, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        if (std::stoull(line.substr(0, line.find(','))) <= last) rows.push_back(line);
    }
    return rows;
}

}  // namespace detail

/// Full training run: ingest, (re)initialize, step, log and checkpoint.
inline LoopResult train_loop(const TrainConfig& cfg, const Dataset& ds, const std::filesystem::path& out_dir,
                             const LoopOptions& opt = {}) {
    namespace fs = std::filesystem;
    cfg.validate();
    if (ds.r != cfg.r())
        throw TrainingError("dataset degraded at r=" + std::to_string(ds.r) + " but config has r=" + std::to_string(cfg.r()));
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (!fs::is_directory(out_dir)) throw TrainingError("cannot create output directory " + out_dir.string());

    ad::ParamStore<float> params;
    ad::AdamState<float> adam;
    std::uint64_t start = 0;
    if (!opt.resume.empty()) {
        Checkpoint ck = load_checkpoint(opt.resume);
        if (model::MDFNConfig::from_kv(ck.config) != cfg.model)
            throw TrainingError("checkpoint " + opt.resume.string() + " was trained with a different model config");
        params = std::move(ck.params);
        if (ck.adam) adam = *ck.adam;
        start = ck.step;
    } else {
        params = model::init_params<float>(cfg.model);
    }

    const fs::path log_path = out_dir / "loss.csv";
    std::vector<std::string> prior = start > 0 ? detail::read_log_prefix(log_path, start) : std::vector<std::string>{};
    std::ofstream log(log_path, std::ios::trunc);
    if (!log) throw TrainingError("cannot write loss log " + log_path.string());
    log << "step,loss,lr,elapsed_ms\n";
    for (const auto& row : prior) log << row << '\n';
    log.flush();

    const auto config_kv = cfg.to_kv();
    auto save = [&](std::uint64_t step, const fs::path& path) {
        Checkpoint ck;
        ck.config = config_kv;
        ck.step = step;
        ck.params = params;
        ck.adam = adam;
        try {
            save_checkpoint(ck, path);
        } catch (const std::exception& e) {
            throw TrainingError("step " + std::to_string(step) + ": " + e.what());
        }
    };

    LoopResult res;
    res.first_step = start + 1;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::uint64_t step = start + 1; step <= cfg.iterations; ++step) {
        adam.lr = cfg.lr_at(step);
        const auto batch = sample_batch(ds, cfg, step);
        double loss = 0;
        try {
            loss = train_step(params, adam, batch, cfg.model);
        } catch (const TrainingError& e) {
            throw TrainingError("step " + std::to_string(step) + ": " + e.what());
        }
        const auto ms = opt.deterministic ? 0LL
                                          : std::chrono::duration_cast<std::chrono::milliseconds>(
                                                std::chrono::steady_clock::now() - t0)
                                                .count();
        log << loss_row(step, loss, adam.lr, ms) << '\n';
        log.flush();
        if (!log) throw TrainingError("step " + std::to_string(step) + ": failed writing " + log_path.string());
        res.losses.push_back(loss);
        res.last_step = step;
        if (opt.on_step) opt.on_step(step, loss);
        if (step % cfg.checkpoint_interval == 0) save(step, out_dir / checkpoint_name(step));
    }
    res.final_checkpoint = out_dir / "final.mdfn";
    save(std::max<std::uint64_t>(res.last_step, start), res.final_checkpoint);
    return res;
}

}  // namespace lfmdfn::train
