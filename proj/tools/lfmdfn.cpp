// lfmdfn: train, evaluate and inspect MDFN light field super-resolution models.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "lfmdfn/eval/report.hpp"
#include "lfmdfn/eval/visualize.hpp"
#include "lfmdfn/lf/color.hpp"
#include "lfmdfn/lf/io.hpp"
#include "lfmdfn/lf/synthetic.hpp"
#include "lfmdfn/model/mdfn.hpp"
#include "lfmdfn/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace lfmdfn;

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadInput = 2, kNotWritable = 3 };

struct OutputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Creates the parent directory and probes that a file can be created there.
void ensure_writable(const fs::path& out, bool is_dir = false) {
    const fs::path dir = is_dir ? out : (out.has_parent_path() ? out.parent_path() : fs::path("."));
    std::error_code ec;
    fs::create_directories(dir, ec);
    const fs::path probe = dir / ".lfmdfn_write_probe";
    std::ofstream os(probe);
    if (!os) throw OutputError("output location is not writable: " + dir.string());
    os.close();
    fs::remove(probe, ec);
}

void write_text(const fs::path& path, const std::string& text) {
    ensure_writable(path);
    std::ofstream os(path);
    if (!(os << text)) throw OutputError("cannot write " + path.string());
}

std::pair<std::size_t, std::size_t> parse_pair(const std::string& s, const char* what) {
    const auto comma = s.find(',');
    try {
        if (comma == std::string::npos) throw std::invalid_argument("no comma");
        std::size_t p1 = 0, p2 = 0;
        const auto a = std::stoul(s.substr(0, comma), &p1);
        const auto b = std::stoul(s.substr(comma + 1), &p2);
        if (p1 != comma || p2 != s.size() - comma - 1 || s[0] == '-' || s[comma + 1] == '-')
            throw std::invalid_argument("junk");
        return {a, b};
    } catch (const std::exception&) {
        throw ConfigError(std::string(what) + " expects two non-negative integers 'a,b', got '" + s + "'");
    }
}

model::MDFNConfig checkpoint_model(const train::Checkpoint& ck) { return model::MDFNConfig::from_kv(ck.config); }

// Y from the model (or any luma method), chroma by bicubic upsampling.
LightField4D super_resolve_colour(const LightField4D& lr, std::size_t r,
                                  const std::function<LightField4D(const LightField4D&)>& luma_sr) {
    if (lr.C() == 1) return luma_sr(lr);
    if (lr.C() != 3) throw ShapeError("expected a 1- or 3-channel light field, got C=" + std::to_string(lr.C()));
    const LightField4D ycc = rgb_to_ycbcr(lr);
    LightField4D up = bicubic_upsample(ycc, r);
    up = replace_channel(up, 0, luma_sr(extract_channel(ycc, 0)));
    return ycbcr_to_rgb(up);
}

struct Common {
    std::string config, checkpoint, dataset, out, format = "csv", input;
    std::size_t scale = 0;
    std::uint64_t seed = 0;
    bool seed_set = false, deterministic = false;
    std::size_t grid = 7;
};

// ---------------------------------------------------------------------------

int cmd_train(const Common& c, std::size_t iterations, const std::string& resume) {
    if (c.config.empty()) throw ConfigError("train needs --config");
    if (!fs::exists(c.config)) throw ConfigError("config file not found: " + c.config);
    auto cfg = train::TrainConfig::load(c.config);
    if (!c.dataset.empty()) cfg.dataset_root = c.dataset;
    if (!c.out.empty()) cfg.out_dir = c.out;
    if (c.seed_set) cfg.set_seed(c.seed);
    if (iterations) cfg.iterations = iterations;
    if (c.scale && c.scale != cfg.r())
        throw ConfigError("--scale " + std::to_string(c.scale) + " disagrees with r=" + std::to_string(cfg.r()) + " in the config");
    cfg.validate();
    if (cfg.dataset_root.empty()) throw ConfigError("config has no dataset_root");
    if (!fs::exists(cfg.dataset_root)) throw train::DatasetError("dataset_root does not exist: " + cfg.dataset_root);
    ensure_writable(cfg.out_dir, true);

    train::IngestOptions io_opt{cfg.r(), train::resolve_cache_dir(cfg.cache_dir), {cfg.grid_u, cfg.grid_v}};
    const auto ds = train::ingest_dataset(cfg.dataset_root, io_opt);
    std::cout << "dataset: " << ds.size() << " light field(s) from " << cfg.dataset_root << "\n"
              << "model: " << model::count_parameters(cfg.model) << " parameters, x" << cfg.r() << "\n";
    train::LoopOptions opt;
    opt.resume = resume;
    opt.deterministic = c.deterministic;
    const std::size_t every = std::max<std::size_t>(1, cfg.iterations / 20);
    opt.on_step = [&](std::uint64_t step, double loss) {
        if (step % every == 0 || step == cfg.iterations) std::printf("step %llu  loss %.6f\n", static_cast<unsigned long long>(step), loss);
        std::fflush(stdout);
    };
    const auto res = train::train_loop(cfg, ds, cfg.out_dir, opt);
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "loss.csv").string() << " and " << res.final_checkpoint.string() << "\n";
    return kOk;
}

int cmd_eval(const Common& c, bool bicubic, bool oracle) {
    if (c.dataset.empty()) throw ConfigError("eval needs --dataset");
    if (static_cast<int>(!c.checkpoint.empty()) + bicubic + oracle != 1)
        throw ConfigError("eval needs exactly one of --checkpoint, --bicubic, --oracle");
    if (c.format != "csv" && c.format != "json") throw ConfigError("--format must be csv or json");
    if (!c.out.empty()) ensure_writable(c.out);

    std::optional<train::Checkpoint> ck;
    model::MDFNConfig mcfg;
    std::size_t r = c.scale ? c.scale : 2;
    if (!c.checkpoint.empty()) {
        ck = train::load_checkpoint(c.checkpoint);
        mcfg = checkpoint_model(*ck);
        if (c.scale && c.scale != mcfg.r)
            throw ConfigError("checkpoint was trained for x" + std::to_string(mcfg.r) + " but --scale is " + std::to_string(c.scale));
        r = mcfg.r;
    }
    if (r != 2 && r != 4) throw ConfigError("--scale must be 2 or 4");
    const auto ds = train::ingest_dataset(c.dataset, {r, train::resolve_cache_dir(""), {c.grid, c.grid}});

    eval::MetricsReport rep;
    if (ck) {
        rep = eval::evaluate(ds, [&](const LightField4D& lr) { return model::super_resolve(lr, ck->params, mcfg); }, "MDFN");
        rep.config = ck->config;
        rep.parameters = ck->params.scalar_count();
    } else if (bicubic) {
        rep = eval::evaluate(ds, [r](const LightField4D& lr) { return bicubic_upsample(lr, r); }, "bicubic");
    } else {
        // Scores the ground truth against itself; exercises the scoring path only.
        std::size_t next = 0;
        rep = eval::evaluate(ds, [&](const LightField4D&) { return ds.items[next++].pair.hr; }, "oracle");
    }
    if (c.deterministic) rep.wall_seconds = 0;
    std::cout << eval::format_table(rep);
    if (!c.out.empty()) {
        write_text(c.out, c.format == "json" ? eval::to_json(rep).dump(2) + "\n" : eval::to_csv(rep));
        std::cout << "wrote " << c.out << "\n";
    }
    return kOk;
}

int cmd_sr(const Common& c) {
    if (c.checkpoint.empty() || c.input.empty() || c.out.empty()) throw ConfigError("sr needs --checkpoint, an input and --out");
    ensure_writable(c.out, fs::path(c.out).extension().empty());
    const auto ck0 = train::load_checkpoint(c.checkpoint);
    auto params = ck0.params;
    const auto mcfg = checkpoint_model(ck0);
    if (c.scale && c.scale != mcfg.r)
        throw ConfigError("checkpoint was trained for x" + std::to_string(mcfg.r) + " but --scale is " + std::to_string(c.scale));
    const LightField4D lr = io::load_lf(c.input, {c.grid, c.grid});
    const auto t0 = std::chrono::steady_clock::now();
    const LightField4D sr = super_resolve_colour(lr, mcfg.r, [&](const LightField4D& y) { return model::super_resolve(y, params, mcfg); });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
        io::save_lf(sr, c.out);
    } catch (const std::exception& e) {
        throw OutputError(e.what());
    }
    std::printf("input %s -> output %s in %.2f s\nwrote %s\n", lr.dims().str().c_str(), sr.dims().str().c_str(), secs, c.out.c_str());
    return kOk;
}

int cmd_filters(const Common& c, const std::string& view, const std::string& pixel) {
    if (c.checkpoint.empty() || c.input.empty() || c.out.empty()) throw ConfigError("filters needs --checkpoint, an input and --out");
    const auto [u, v] = parse_pair(view, "--view");
    const auto [x, y] = parse_pair(pixel, "--pixel");
    fs::path png = c.out;
    if (png.extension() != ".png") png += ".png";
    fs::path json = png;
    json.replace_extension(".json");
    ensure_writable(png);
    auto ck = train::load_checkpoint(c.checkpoint);
    const auto mcfg = checkpoint_model(ck);
    if (mcfg.upsampler != model::Upsampler::DynamicFilter) throw ConfigError("checkpoint uses the deconvolution upsampler; it has no dynamic filters");
    const LightField4D lr = train::to_luma(io::load_lf(c.input, {c.grid, c.grid}));
    if (u >= lr.U() || v >= lr.V() || x >= lr.X() || y >= lr.Y())
        throw RangeError("view (" + std::to_string(u) + "," + std::to_string(v) + ") / pixel (" + std::to_string(x) + "," +
                         std::to_string(y) + ") outside light field " + lr.dims().str());
    ad::NoGradGuard guard;
    const auto res = model::forward_full(model::to_tensor(lr), ck.params, mcfg);
    const auto field = model::DynamicFilterField::from_tensor(res.filters, lr.U(), lr.V());
    const auto group = eval::filter_group(field, mcfg.r, u, v, x, y);
    io::write_png(eval::render_filter_grid(group), png);
    write_text(json, eval::to_json(group).dump(2) + "\n");
    std::printf("%zu filters of %zux%zu for view (%zu,%zu) pixel (%zu,%zu)\nwrote %s and %s\n", group.tiles.size(), group.d,
                group.d, u, v, x, y, png.c_str(), json.c_str());
    return kOk;
}

int cmd_epi(const Common& c, const std::string& kind, const std::string& index, std::size_t scale, bool normalize) {
    if (c.input.empty() || c.out.empty()) throw ConfigError("epi needs an input and --out");
    PlaneKind k;
    if (kind == "h" || kind == "horizontal" || kind == "epi_h") k = PlaneKind::EpiHorizontal;
    else if (kind == "v" || kind == "vertical" || kind == "epi_v") k = PlaneKind::EpiVertical;
    else throw ConfigError("--kind must be h or v, got '" + kind + "'");
    const auto [a, b] = parse_pair(index, "--index");
    ensure_writable(c.out);
    const LightField4D lf = io::load_lf(c.input, {c.grid, c.grid});
    const Image2D img = eval::epi_image(lf, k, a, b, scale, normalize);
    io::write_png(img, c.out);
    std::printf("EPI %s (%zu,%zu): %zux%zu -> wrote %s\n", to_string(k), a, b, img.rows, img.cols, c.out.c_str());
    return kOk;
}

int cmd_synth(const Common& c, std::size_t count, std::size_t size, std::size_t angular, std::size_t channels,
              const std::string& format) {
    if (c.out.empty()) throw ConfigError("synth needs --out");
    if (format != "lf" && format != "png" && format != "dir") throw ConfigError("--format for synth must be lf, png or dir");
    ensure_writable(c.out, true);
    for (std::size_t i = 0; i < count; ++i) {
        SceneOptions so;
        so.U = so.V = angular;
        so.X = so.Y = size;
        so.C = channels;
        so.seed = (c.seed_set ? c.seed : 1) * 1000 + i;
        const auto lf = synthesize_lf(so);
        char name[32];
        std::snprintf(name, sizeof name, "scene_%03zu", i);
        fs::path p = fs::path(c.out) / name;
        if (format == "lf") p += ".lf";
        if (format == "png") p += ".png";
        io::save_lf(lf, p);
        std::cout << "wrote " << p.string() << " " << lf.dims().str() << "\n";
    }
    return kOk;
}

int cmd_params(const Common& c) {
    model::MDFNConfig cfg;
    if (!c.config.empty()) cfg = model::MDFNConfig::from_kv(kv::load(c.config));
    if (c.scale) cfg.r = c.scale;
    cfg.validate();
    std::size_t total = 0;
    for (const auto& row : model::parameter_report(cfg)) {
        std::printf("%-28s %10zu\n", row.layer.c_str(), row.count);
        total += row.count;
    }
    std::printf("%-28s %10zu\n", "total", total);
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MDFN light field spatial super-resolution"};
    app.require_subcommand(1);
    Common c;
    auto common = [&c](CLI::App* sub) {
        sub->add_option("--config", c.config, "key=value config file");
        sub->add_option("--checkpoint", c.checkpoint, "model checkpoint (.mdfn)");
        sub->add_option("--dataset", c.dataset, "directory of light fields");
        sub->add_option("--scale", c.scale, "upscale factor r (2 or 4)");
        sub->add_option("--seed", c.seed, "random seed")->each([&c](const std::string&) { c.seed_set = true; });
        sub->add_option("--out", c.out, "output path");
        sub->add_option("--format", c.format, "csv or json");
        sub->add_flag("--deterministic", c.deterministic, "bit-reproducible logs (elapsed time logged as 0)");
        sub->add_option("--grid", c.grid, "angular size of single-image grid PNG input")->capture_default_str();
    };

    auto* train = app.add_subcommand("train", "train a model from a config");
    common(train);
    std::size_t iterations = 0;
    std::string resume;
    train->add_option("--iterations", iterations, "override the configured iteration count");
    train->add_option("--resume", resume, "continue from a checkpoint");

    auto* eval = app.add_subcommand("eval", "score a model (or a baseline) on a dataset");
    common(eval);
    bool bicubic = false, oracle = false;
    eval->add_flag("--bicubic", bicubic, "score bicubic upsampling instead of a model");
    eval->add_flag("--oracle", oracle, "score the ground truth against itself");

    auto* sr = app.add_subcommand("sr", "super-resolve one light field");
    common(sr);
    sr->add_option("input", c.input, "input light field")->required();

    auto* filters = app.add_subcommand("filters", "render the dynamic filters of one LR pixel");
    common(filters);
    std::string view = "3,3", pixel = "0,0";
    filters->add_option("input", c.input, "LR light field")->required();
    filters->add_option("--view", view, "view u,v")->capture_default_str();
    filters->add_option("--pixel", pixel, "LR pixel x,y")->capture_default_str();

    auto* epi = app.add_subcommand("epi", "export an epipolar plane image");
    common(epi);
    std::string kind = "h", index = "3,0";
    std::size_t epi_scale = 1;
    bool normalize = false;
    epi->add_option("input", c.input, "light field")->required();
    epi->add_option("--kind", kind, "h (fix u,x) or v (fix v,y)")->capture_default_str();
    epi->add_option("--index", index, "fixed indices a,b")->capture_default_str();
    epi->add_option("--magnify", epi_scale, "angular-axis magnification")->capture_default_str();
    epi->add_flag("--normalize", normalize, "stretch intensities to the full range");

    auto* synth = app.add_subcommand("synth", "write synthetic light fields");
    common(synth);
    std::size_t count = 4, size = 48, angular = 7, channels = 3;
    std::string synth_format = "lf";
    synth->add_option("--count", count)->capture_default_str();
    synth->add_option("--size", size, "spatial size in pixels")->capture_default_str();
    synth->add_option("--angular", angular, "angular size")->capture_default_str();
    synth->add_option("--channels", channels, "1 or 3")->capture_default_str();
    synth->add_option("--as", synth_format, "lf, png or dir")->capture_default_str();

    auto* params = app.add_subcommand("params", "per-layer parameter count");
    common(params);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*train) return cmd_train(c, iterations, resume);
        if (*eval) return cmd_eval(c, bicubic, oracle);
        if (*sr) return cmd_sr(c);
        if (*filters) return cmd_filters(c, view, pixel);
        if (*epi) {
            // --scale is the EPI magnification here.
            return cmd_epi(c, kind, index, c.scale ? c.scale : epi_scale, normalize);
        }
        if (*synth) return cmd_synth(c, count, size, angular, channels, synth_format);
        if (*params) return cmd_params(c);
    } catch (const OutputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNotWritable;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kBadInput;
    } catch (const train::DatasetError& e) {
        std::cerr << "dataset error: " << e.what() << "\n";
        return kBadInput;
    } catch (const train::CheckpointError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kBadInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kFailure;
    }
    return kFailure;
}
