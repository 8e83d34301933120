#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "lfmdfn/lf/metrics.hpp"
#include "lfmdfn/train/dataset.hpp"
#include "lfmdfn/util/kv.hpp"

namespace lfmdfn::eval {

struct MetricsRow {
    std::string name;
    double psnr = 0;  // +inf when the reconstruction is exact
    double ssim = 0;
};

/// Per-light-field scores with dataset means. Infinite PSNRs are left out of
/// the PSNR mean and counted in `inf_rows`.
struct MetricsReport {
    std::string method;
    std::size_t r = 2;
    std::vector<MetricsRow> rows;
    double mean_psnr = 0;
    double mean_ssim = 0;
    std::size_t inf_rows = 0;
    KeyValues config;
    std::size_t parameters = 0;
    double wall_seconds = 0;

    void finalize() {
        double sp = 0, ss = 0;
        std::size_t finite = 0;
        inf_rows = 0;
        for (const auto& row : rows) {
            if (std::isinf(row.psnr)) {
                ++inf_rows;
            } else {
                sp += row.psnr;
                ++finite;
            }
            ss += row.ssim;
        }
        mean_psnr = finite ? sp / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
        mean_ssim = rows.empty() ? 0.0 : ss / static_cast<double>(rows.size());
    }
};

/// Super-resolution method under test: maps a degraded luma field to (U,V,rX,rY).
using Method = std::function<LightField4D(const LightField4D& lr)>;

/// Degrade, super-resolve and score every item; rows are in dataset order.
inline MetricsReport evaluate(const train::Dataset& ds, const Method& method, std::string method_name) {
    MetricsReport rep;
    rep.method = std::move(method_name);
    rep.r = ds.r;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& item : ds.items) {
        const LightField4D sr = method(item.pair.lr);
        if (!(sr.dims() == item.pair.hr.dims()))
            throw ShapeError(item.name + ": method produced " + sr.dims().str() + ", expected " + item.pair.hr.dims().str());
        const auto score = lf_metrics(item.pair.hr, sr);
        rep.rows.push_back({item.name, score.psnr, score.ssim});
    }
    rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rep.finalize();
    return rep;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string fmt_psnr(double v, int decimals = 2) {
    if (std::isinf(v)) return "inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

inline std::string fmt_fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

// Full precision, round-trippable; inf as "inf".
inline std::string fmt_exact(double v) { return std::isinf(v) ? "inf" : kv::fmt_double(v); }

inline double parse_number(const std::string& s) {
    if (s == "inf") return std::numeric_limits<double>::infinity();
    return std::stod(s);
}

/// Human-readable table in the "PSNR/SSIM" cell style.
inline std::string format_table(const MetricsReport& rep) {
    std::size_t w = 10;
    for (const auto& row : rep.rows) w = std::max(w, row.name.size());
    std::ostringstream os;
    auto pad = [w](const std::string& s) { return s + std::string(w - std::min(w, s.size()), ' '); };
    os << pad("light field") << "  " << rep.method << " x" << rep.r << " (PSNR/SSIM)\n";
    for (const auto& row : rep.rows) os << pad(row.name) << "  " << fmt_psnr(row.psnr) << "/" << fmt_fixed(row.ssim, 3) << "\n";
    os << pad("mean") << "  " << fmt_psnr(rep.mean_psnr) << "/" << fmt_fixed(rep.mean_ssim, 3)
       << (rep.inf_rows ? " *" : "") << "\n";
    if (rep.inf_rows)
        os << "* " << rep.inf_rows << " row(s) with infinite PSNR (exact reconstruction) excluded from the PSNR mean\n";
    os << "parameters: " << rep.parameters << "   wall time: " << fmt_fixed(rep.wall_seconds, 2) << " s\n";
    return os.str();
}

inline std::string to_csv(const MetricsReport& rep) {
    std::ostringstream os;
    os << "name,psnr,ssim\n";
    for (const auto& row : rep.rows) os << row.name << "," << fmt_exact(row.psnr) << "," << fmt_exact(row.ssim) << "\n";
    os << "mean," << fmt_exact(rep.mean_psnr) << "," << fmt_exact(rep.mean_ssim) << "\n";
    os << "# method=" << rep.method << "\n# r=" << rep.r << "\n# inf_rows=" << rep.inf_rows
       << "\n# parameters=" << rep.parameters << "\n# wall_seconds=" << fmt_exact(rep.wall_seconds) << "\n";
    for (const auto& [k, v] : rep.config) os << "# config." << k << "=" << v << "\n";
    return os.str();
}

inline MetricsReport from_csv(const std::string& text) {
    MetricsReport rep;
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    if (kv::trim(line) != "name,psnr,ssim") throw std::invalid_argument("metrics CSV: unexpected header '" + line + "'");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto eq = line.find('=');
            const std::string key = kv::trim(line.substr(1, eq - 1)), val = line.substr(eq + 1);
            if (key == "method") rep.method = val;
            else if (key == "r") rep.r = std::stoul(val);
            else if (key == "inf_rows") rep.inf_rows = std::stoul(val);
            else if (key == "parameters") rep.parameters = std::stoul(val);
            else if (key == "wall_seconds") rep.wall_seconds = parse_number(val);
            else if (key.rfind("config.", 0) == 0) rep.config[key.substr(7)] = val;
            continue;
        }
        std::istringstream ls(line);
        std::string name, p, s;
        std::getline(ls, name, ',');
        std::getline(ls, p, ',');
        std::getline(ls, s, ',');
        if (name == "mean") {
            rep.mean_psnr = parse_number(p);
            rep.mean_ssim = parse_number(s);
        } else {
            rep.rows.push_back({name, parse_number(p), parse_number(s)});
        }
    }
    return rep;
}

inline nlohmann::json json_number(double v) { return std::isinf(v) ? nlohmann::json("inf") : nlohmann::json(v); }
inline double json_value(const nlohmann::json& j) { return j.is_string() ? parse_number(j.get<std::string>()) : j.get<double>(); }

inline nlohmann::json to_json(const MetricsReport& rep) {
    nlohmann::json j;
    j["method"] = rep.method;
    j["r"] = rep.r;
    j["rows"] = nlohmann::json::array();
    for (const auto& row : rep.rows) j["rows"].push_back({{"name", row.name}, {"psnr", json_number(row.psnr)}, {"ssim", json_number(row.ssim)}});
    j["mean"] = {{"psnr", json_number(rep.mean_psnr)}, {"ssim", json_number(rep.mean_ssim)}};
    j["inf_rows"] = rep.inf_rows;
    j["parameters"] = rep.parameters;
    j["wall_seconds"] = rep.wall_seconds;
    j["config"] = rep.config;
    return j;
}

inline MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport rep;
    rep.method = j.at("method").get<std::string>();
    rep.r = j.at("r").get<std::size_t>();
    for (const auto& row : j.at("rows"))
        rep.rows.push_back({row.at("name").get<std::string>(), json_value(row.at("psnr")), json_value(row.at("ssim"))});
    rep.mean_psnr = json_value(j.at("mean").at("psnr"));
    rep.mean_ssim = json_value(j.at("mean").at("ssim"));
    rep.inf_rows = j.at("inf_rows").get<std::size_t>();
    rep.parameters = j.at("parameters").get<std::size_t>();
    rep.wall_seconds = j.at("wall_seconds").get<double>();
    rep.config = j.at("config").get<KeyValues>();
    return rep;
}

}  // namespace lfmdfn::eval
