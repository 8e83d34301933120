#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "json.hpp"

#include "lfmdfn/eval/report.hpp"
#include "lfmdfn/eval/visualize.hpp"
#include "lfmdfn/lf/io.hpp"
#include "lfmdfn/lf/synthetic.hpp"
#include "lfmdfn/train/checkpoint.hpp"
#include "test_util.hpp"

using namespace lfmdfn;
namespace fs = std::filesystem;
using testutil::quoted;
using testutil::run_cli;

namespace {

const fs::path kSmokeConfig = fs::path(LFMDFN_SOURCE_DIR) / "configs" / "smoke.cfg";

std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), {}};
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

fs::path write_corpus(const std::string& name, std::size_t count, std::size_t size = 24) {
    const auto dir = testutil::scratch_dir(name);
    for (std::size_t i = 0; i < count; ++i) {
        SceneOptions so;
        so.X = so.Y = size;
        so.seed = 40 + i;
        io::save_lf(synthesize_lf(so), dir / ("scene" + std::to_string(i) + ".lf"));
    }
    return dir;
}

model::MDFNConfig small_model() {
    model::MDFNConfig m;
    m.n = 2;
    m.c = 8;
    m.dfb_mid_channels = 8;
    m.rb_mid_channels = 4;
    return m;
}

fs::path write_checkpoint(const fs::path& dir, const model::MDFNConfig& m, bool zero_dfb_conv2 = false) {
    train::Checkpoint ck;
    ck.config = m.to_kv();
    ck.params = model::init_params<float>(m);
    if (zero_dfb_conv2)
        for (const char* n : {"dfb.conv2.weight", "dfb.conv2.bias"})
            for (auto& v : ck.params.at(n).data()) v = 0.0f;
    const auto p = dir / (zero_dfb_conv2 ? "zeroed.mdfn" : "model.mdfn");
    train::save_checkpoint(ck, p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& body) {
    const auto p = dir / "run.cfg";
    std::ofstream(p) << body;
    return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// train

TEST(Train, MissingDatasetRootExitsTwoNamingThePath) {
    const auto dir = testutil::scratch_dir("cli_nodata");
    const auto cfg = write_config(dir, "iterations = 2\ndataset_root = /nonexistent/lfmdfn_corpus\nout_dir = out\n");
    const auto r = run_cli("train --config " + quoted(cfg));
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("/nonexistent/lfmdfn_corpus"), std::string::npos) << r.output;
}

TEST(Train, SmokeConfigWritesTenLogRows) {
    const auto data = write_corpus("cli_smoke_data", 2);
    const auto out = testutil::scratch_dir("cli_smoke_out");
    const auto r = run_cli("train --config " + quoted(kSmokeConfig) + " --dataset " + quoted(data) + " --out " +
                           quoted(out) + " --deterministic");
    ASSERT_EQ(r.code, 0) << r.output;
    const std::string log = read_file(out / "loss.csv");
    EXPECT_EQ(log.rfind("step,loss,lr,elapsed_ms\n", 0), 0u);
    EXPECT_EQ(count_lines(log), 11u);
    EXPECT_TRUE(fs::exists(out / "final.mdfn"));
    EXPECT_TRUE(fs::exists(out / "ckpt_00000005.mdfn"));
}

TEST(Train, ScaleThreeIsRejectedBeforeAnyWork) {
    const auto dir = testutil::scratch_dir("cli_r3");
    const auto cfg = write_config(dir, "r = 3\ndataset_root = /nonexistent/lfmdfn_corpus\nout_dir = out\n");
    const auto r = run_cli("train --config " + quoted(cfg));
    EXPECT_EQ(r.code, 2) << r.output;
    EXPECT_NE(r.output.find("r=3"), std::string::npos) << r.output;
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Train, MissingConfigExitsTwo) {
    EXPECT_EQ(run_cli("train --config /nonexistent/run.cfg").code, 2);
}

// ---------------------------------------------------------------------------
// eval

TEST(Eval, OracleScoresInfAndOne) {
    const auto data = write_corpus("cli_oracle", 2);
    const auto out = testutil::scratch_dir("cli_oracle_out") / "m.csv";
    const auto r = run_cli("eval --oracle --dataset " + quoted(data) + " --out " + quoted(out));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto rep = eval::from_csv(read_file(out));
    ASSERT_EQ(rep.rows.size(), 2u);
    for (const auto& row : rep.rows) {
        EXPECT_TRUE(std::isinf(row.psnr)) << row.name;
        EXPECT_EQ(row.ssim, 1.0) << row.name;
    }
    EXPECT_EQ(rep.inf_rows, 2u);
    EXPECT_NE(r.output.find("inf/1.000"), std::string::npos) << r.output;
}

TEST(Eval, CsvAndJsonAgreeFieldForField) {
    const auto data = write_corpus("cli_formats", 2);
    const auto out = testutil::scratch_dir("cli_formats_out");
    const std::string base = "eval --bicubic --deterministic --dataset " + quoted(data);
    ASSERT_EQ(run_cli(base + " --out " + quoted(out / "m.csv")).code, 0);
    ASSERT_EQ(run_cli(base + " --format json --out " + quoted(out / "m.json")).code, 0);
    const auto a = eval::from_csv(read_file(out / "m.csv"));
    const auto b = eval::from_json(nlohmann::json::parse(read_file(out / "m.json")));
    EXPECT_EQ(a.method, b.method);
    EXPECT_EQ(a.r, b.r);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        EXPECT_EQ(a.rows[i].name, b.rows[i].name);
        EXPECT_EQ(a.rows[i].psnr, b.rows[i].psnr);
        EXPECT_EQ(a.rows[i].ssim, b.rows[i].ssim);
    }
    EXPECT_EQ(a.mean_psnr, b.mean_psnr);
    EXPECT_EQ(a.mean_ssim, b.mean_ssim);
    EXPECT_EQ(a.inf_rows, b.inf_rows);
    EXPECT_EQ(a.parameters, b.parameters);
    EXPECT_EQ(a.wall_seconds, b.wall_seconds);
    EXPECT_EQ(a.config, b.config);
}

TEST(Eval, MeansRecomputeFromRows) {
    const auto data = write_corpus("cli_means", 3);
    const auto out = testutil::scratch_dir("cli_means_out") / "m.csv";
    ASSERT_EQ(run_cli("eval --bicubic --dataset " + quoted(data) + " --out " + quoted(out)).code, 0);
    const auto rep = eval::from_csv(read_file(out));
    ASSERT_EQ(rep.rows.size(), 3u);
    double p = 0, s = 0;
    for (const auto& row : rep.rows) {
        p += row.psnr;
        s += row.ssim;
    }
    EXPECT_NEAR(rep.mean_psnr, p / 3, 1e-9);
    EXPECT_NEAR(rep.mean_ssim, s / 3, 1e-9);
}

TEST(Eval, CheckpointScaleMismatchExitsTwo) {
    const auto data = write_corpus("cli_mismatch", 1);
    const auto ck = write_checkpoint(testutil::scratch_dir("cli_mismatch_ck"), small_model());
    const auto r = run_cli("eval --checkpoint " + quoted(ck) + " --scale 4 --dataset " + quoted(data));
    EXPECT_EQ(r.code, 2) << r.output;
}

TEST(Eval, ModelRowsFollowDatasetOrder) {
    const auto data = write_corpus("cli_model_eval", 2);
    const auto dir = testutil::scratch_dir("cli_model_eval_out");
    const auto ck = write_checkpoint(dir, small_model());
    const auto r = run_cli("eval --checkpoint " + quoted(ck) + " --dataset " + quoted(data) + " --format json --out " +
                           quoted(dir / "m.json"));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto rep = eval::from_json(nlohmann::json::parse(read_file(dir / "m.json")));
    ASSERT_EQ(rep.rows.size(), 2u);
    EXPECT_EQ(rep.rows[0].name, "scene0");
    EXPECT_EQ(rep.rows[1].name, "scene1");
    EXPECT_EQ(rep.parameters, model::count_parameters(small_model()));
    EXPECT_EQ(rep.config.at("n"), "2");
}

// ---------------------------------------------------------------------------
// sr

TEST(Sr, DoublesTheSpatialSizeDeterministically) {
    const auto dir = testutil::scratch_dir("cli_sr");
    const auto ck = write_checkpoint(dir, small_model());
    SceneOptions so;
    so.X = so.Y = 24;
    so.C = 3;
    io::save_lf(synthesize_lf(so), dir / "in.lf");
    const std::string base = "sr " + quoted(dir / "in.lf") + " --checkpoint " + quoted(ck);
    const auto r = run_cli(base + " --out " + quoted(dir / "a.lf"));
    ASSERT_EQ(r.code, 0) << r.output;
    ASSERT_EQ(run_cli(base + " --out " + quoted(dir / "b.lf")).code, 0);
    const auto out = io::load_lf(dir / "a.lf");
    EXPECT_EQ(out.dims(), (LfDims{7, 7, 48, 48, 3}));
    EXPECT_EQ(read_file(dir / "a.lf"), read_file(dir / "b.lf"));
}

TEST(Sr, UnwritableOutputExitsThree) {
    const auto dir = testutil::scratch_dir("cli_sr_ro");
    const auto ck = write_checkpoint(dir, small_model());
    SceneOptions so;
    so.X = so.Y = 24;
    io::save_lf(synthesize_lf(so), dir / "in.lf");
    std::ofstream(dir / "blocker") << "x";
    const auto r = run_cli("sr " + quoted(dir / "in.lf") + " --checkpoint " + quoted(ck) + " --out " +
                           quoted(dir / "blocker" / "sub" / "out.lf"));
    EXPECT_EQ(r.code, 3) << r.output;
}

TEST(Sr, BadCheckpointExitsTwo) {
    const auto dir = testutil::scratch_dir("cli_sr_badck");
    std::ofstream(dir / "junk.mdfn") << "not a checkpoint";
    SceneOptions so;
    so.X = so.Y = 24;
    io::save_lf(synthesize_lf(so), dir / "in.lf");
    const auto r = run_cli("sr " + quoted(dir / "in.lf") + " --checkpoint " + quoted(dir / "junk.mdfn") + " --out " +
                           quoted(dir / "o.lf"));
    EXPECT_EQ(r.code, 2) << r.output;
}

// ---------------------------------------------------------------------------
// filters

TEST(Filters, FourNormalizedTilesAtScaleTwo) {
    const auto dir = testutil::scratch_dir("cli_filters");
    const auto ck = write_checkpoint(dir, small_model());
    SceneOptions so;
    so.X = so.Y = 12;
    io::save_lf(synthesize_lf(so), dir / "in.lf");
    const auto r = run_cli("filters " + quoted(dir / "in.lf") + " --checkpoint " + quoted(ck) +
                           " --view 3,3 --pixel 5,6 --out " + quoted(dir / "f.png"));
    ASSERT_EQ(r.code, 0) << r.output;
    const auto j = nlohmann::json::parse(read_file(dir / "f.json"));
    ASSERT_EQ(j["tiles"].size(), 4u);
    EXPECT_EQ(j["d"], 5);
    for (const auto& t : j["tiles"]) {
        ASSERT_EQ(t["taps"].size(), 25u);
        double s = 0;
        for (const auto& w : t["taps"]) s += w.get<double>();
        EXPECT_NEAR(s, 1.0, 1e-5);
        EXPECT_NEAR(t["sum"].get<double>(), 1.0, 1e-5);
    }
    const auto img = io::read_png(dir / "f.png");
    EXPECT_EQ(img.rows, 2 * 5 * 16 + 3);
    EXPECT_EQ(img.cols, img.rows);
}

TEST(Filters, ZeroedSecondConvGivesUniformTaps) {
    const auto dir = testutil::scratch_dir("cli_filters_zero");
    const auto ck = write_checkpoint(dir, small_model(), true);
    SceneOptions so;
    so.X = so.Y = 12;
    io::save_lf(synthesize_lf(so), dir / "in.lf");
    ASSERT_EQ(run_cli("filters " + quoted(dir / "in.lf") + " --checkpoint " + quoted(ck) + " --out " +
                      quoted(dir / "f.png"))
                  .code,
              0);
    const auto j = nlohmann::json::parse(read_file(dir / "f.json"));
    for (const auto& t : j["tiles"])
        for (const auto& w : t["taps"]) EXPECT_NEAR(w.get<double>(), 0.04, 1e-7);
}

TEST(Filters, OutOfRangePixelFails) {
    const auto dir = testutil::scratch_dir("cli_filters_range");
    const auto ck = write_checkpoint(dir, small_model());
    SceneOptions so;
    so.X = so.Y = 12;
    io::save_lf(synthesize_lf(so), dir / "in.lf");
    const auto r = run_cli("filters " + quoted(dir / "in.lf") + " --checkpoint " + quoted(ck) + " --pixel 12,0 --out " +
                           quoted(dir / "f.png"));
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.output.find("outside"), std::string::npos) << r.output;
}

TEST(Filters, DeconvolutionCheckpointIsRejected) {
    const auto dir = testutil::scratch_dir("cli_filters_deconv");
    auto m = small_model();
    m.upsampler = model::Upsampler::Deconvolution;
    const auto ck = write_checkpoint(dir, m);
    SceneOptions so;
    so.X = so.Y = 12;
    io::save_lf(synthesize_lf(so), dir / "in.lf");
    EXPECT_EQ(run_cli("filters " + quoted(dir / "in.lf") + " --checkpoint " + quoted(ck) + " --out " +
                      quoted(dir / "f.png"))
                  .code,
              2);
}

// ---------------------------------------------------------------------------
// epi

TEST(Epi, ShapesFollowTheFixedAxes) {
    const auto dir = testutil::scratch_dir("cli_epi");
    const auto lf = testutil::random_lf({5, 6, 10, 12, 1}, 3);
    io::save_lf(lf, dir / "in.lf");
    ASSERT_EQ(run_cli("epi " + quoted(dir / "in.lf") + " --kind h --index 2,4 --out " + quoted(dir / "h.png")).code, 0);
    ASSERT_EQ(run_cli("epi " + quoted(dir / "in.lf") + " --kind v --index 1,7 --magnify 3 --out " + quoted(dir / "v.png")).code, 0);
    const auto h = io::read_png(dir / "h.png"), v = io::read_png(dir / "v.png");
    EXPECT_EQ(h.rows, 6u);
    EXPECT_EQ(h.cols, 12u);
    EXPECT_EQ(v.rows, 5u * 3);
    EXPECT_EQ(v.cols, 10u);
    for (std::size_t j = 0; j < 12; ++j)
        EXPECT_NEAR(h.at(3, j, 0), lf.at(2, 3, 4, j), 0.5 / 255 + 1e-6);
}

TEST(Epi, ConstantFieldGivesConstantImage) {
    const auto dir = testutil::scratch_dir("cli_epi_const");
    LightField4D lf({7, 7, 8, 8, 1});
    for (auto& v : lf.data()) v = 0.4f;
    io::save_lf(lf, dir / "in.lf");
    ASSERT_EQ(run_cli("epi " + quoted(dir / "in.lf") + " --kind v --index 0,0 --out " + quoted(dir / "e.png")).code, 0);
    const auto img = io::read_png(dir / "e.png");
    for (float v : img.data) EXPECT_EQ(v, img.data[0]);
    EXPECT_NEAR(img.data[0], 0.4f, 0.5f / 255);
}

TEST(Epi, OutOfRangeIndexIsRejected) {
    const auto dir = testutil::scratch_dir("cli_epi_range");
    io::save_lf(testutil::random_lf({3, 3, 4, 4, 1}, 1), dir / "in.lf");
    const auto r = run_cli("epi " + quoted(dir / "in.lf") + " --kind h --index 3,0 --out " + quoted(dir / "e.png"));
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(fs::exists(dir / "e.png"));
    EXPECT_NE(run_cli("epi " + quoted(dir / "in.lf") + " --kind z --out " + quoted(dir / "e.png")).code, 0);
}

// ---------------------------------------------------------------------------
// report and visualization

TEST(Report, TableFormatAndInfFootnote) {
    eval::MetricsReport rep;
    rep.method = "MDFN";
    rep.rows = {{"a", 40.123, 0.98765}, {"b", std::numeric_limits<double>::infinity(), 1.0}};
    rep.finalize();
    EXPECT_EQ(rep.inf_rows, 1u);
    EXPECT_EQ(rep.mean_psnr, 40.123);
    const auto t = eval::format_table(rep);
    EXPECT_NE(t.find("PSNR/SSIM"), std::string::npos);
    EXPECT_NE(t.find("40.12/0.988"), std::string::npos);
    EXPECT_NE(t.find("inf/1.000"), std::string::npos);
    EXPECT_NE(t.find("1 row(s) with infinite PSNR"), std::string::npos);
}

TEST(Report, CsvRoundTripIsExact) {
    eval::MetricsReport rep;
    rep.method = "bicubic";
    rep.r = 4;
    rep.rows = {{"x", 31.0 / 3, 0.1 + 0.2}, {"y", 29.5, 0.7}};
    rep.config["n"] = "8";
    rep.parameters = 12;
    rep.wall_seconds = 1.0 / 7;
    rep.finalize();
    const auto back = eval::from_csv(eval::to_csv(rep));
    EXPECT_EQ(back.rows[0].psnr, rep.rows[0].psnr);
    EXPECT_EQ(back.rows[0].ssim, rep.rows[0].ssim);
    EXPECT_EQ(back.mean_psnr, rep.mean_psnr);
    EXPECT_EQ(back.wall_seconds, rep.wall_seconds);
    EXPECT_EQ(back.config, rep.config);
    EXPECT_EQ(back.r, 4u);
}

TEST(Visualize, HeatGridSharesOneScale) {
    eval::FilterGroup g;
    g.r = 2;
    g.d = 3;
    g.tiles = {std::vector<float>(9, 0.0f), std::vector<float>(9, 1.0f), std::vector<float>(9, 0.5f),
               std::vector<float>(9, 0.25f)};
    const auto img = eval::render_filter_grid(g, 4);
    ASSERT_EQ(img.rows, 2u * 12 + 3);
    EXPECT_EQ(img.at(1, 1, 0), 0.0f);                // tile 0 at the minimum: black
    EXPECT_EQ(img.at(1, 14, 2), 1.0f);               // tile 1 at the maximum: white
    EXPECT_EQ(img.at(0, 0, 0), 0.5f);                // gutter
    EXPECT_EQ(img.at(14, 1, 0), 1.0f);               // 0.5 -> red saturated
    EXPECT_NEAR(img.at(14, 1, 1), 0.5f, 1e-6);
}
