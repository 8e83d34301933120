#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "grad_suite.hpp"
#include "lfmdfn/lf/resample.hpp"
#include "oracles.hpp"

using namespace lfmdfn;
using namespace lfmdfn::model;
using ad::Tensor;

namespace {

MDFNConfig small_config() {
    MDFNConfig c;
    c.n = 2;
    c.c = 8;
    c.d = 3;
    c.dfb_mid_channels = 4;
    c.rb_mid_channels = 4;
    return c;
}

std::size_t report_count(const MDFNConfig& cfg, const std::string& layer) {
    for (const auto& row : parameter_report(cfg))
        if (row.layer == layer) return row.count;
    return 0;
}

bool all_finite(const Tensor<float>& t) {
    return std::all_of(t.data().begin(), t.data().end(), [](float v) { return std::isfinite(v); });
}

}  // namespace

TEST(Parameters, SingleBranchCount) {
    // One 3x3 conv 1 -> 20 with bias and per-channel PReLU.
    EXPECT_EQ(report_count(MDFNConfig{}, "mdfb0.sai"), 1u * 20 * 9 + 20 + 20);
    EXPECT_EQ(report_count(MDFNConfig{}, "mdfb0.sai"), 220u);
}

TEST(Parameters, DefaultGolden) {
    // Layer-shape summation, written out independently of parameter_specs.
    const std::size_t first = 4 * (20 * 1 * 9 + 20 + 20);
    const std::size_t later = 7 * 4 * (20 * 80 * 9 + 20 + 20);
    const std::size_t dfb = (4 * 64 * 80 + 4 * 64) + (25 * 64 + 25);
    const std::size_t rb = (32 * 80 + 32 + 32) + (4 * 32 + 4);
    EXPECT_EQ(first + later + dfb + rb, 430317u);
    EXPECT_EQ(count_parameters(MDFNConfig{}), 430317u);
    EXPECT_EQ(init_params<float>(MDFNConfig{}).scalar_count(), 430317u);
}

TEST(Parameters, AblationParity) {
    MDFNConfig full, sa, epi;
    sa.variant = Variant::SAOnly;
    epi.variant = Variant::EPIOnly;
    const double f = static_cast<double>(count_parameters(full));
    EXPECT_LT(std::abs(count_parameters(sa) - f) / f, 0.02);
    EXPECT_LT(std::abs(count_parameters(epi) - f) / f, 0.02);
    EXPECT_EQ(count_parameters(sa), count_parameters(epi));
}

TEST(Parameters, UpsamplerSwapTouchesOnlyUpsampling) {
    MDFNConfig dyn, dec;
    dec.upsampler = Upsampler::Deconvolution;
    auto names = [](const MDFNConfig& c) {
        auto v = init_params<float>(c).names();
        return std::set<std::string>(v.begin(), v.end());
    };
    const auto a = names(dyn), b = names(dec);
    std::vector<std::string> only_a, only_b;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(only_a));
    std::set_difference(b.begin(), b.end(), a.begin(), a.end(), std::back_inserter(only_b));
    for (const auto& n : only_a) EXPECT_EQ(n.rfind("dfb.", 0), 0u) << n;
    for (const auto& n : only_b) EXPECT_EQ(n.rfind("deconv.", 0), 0u) << n;
    EXPECT_FALSE(only_a.empty());
    EXPECT_FALSE(only_b.empty());
}

TEST(Parameters, InitDeterministic) {
    MDFNConfig a = small_config(), b = small_config();
    b.seed = 2;
    const auto pa = init_params<float>(a), pa2 = init_params<float>(a), pb = init_params<float>(b);
    EXPECT_EQ(pa.at("mdfb1.sai.weight").data(), pa2.at("mdfb1.sai.weight").data());
    EXPECT_NE(pa.at("mdfb1.sai.weight").data(), pb.at("mdfb1.sai.weight").data());
    EXPECT_THROW((MDFNConfig{.c = 10}.validate()), ConfigError);
    EXPECT_THROW((MDFNConfig{.d = 4}.validate()), ConfigError);
    EXPECT_THROW((MDFNConfig{.r = 3}.validate()), ConfigError);
}

TEST(PlaneConv, MatchesFoldConvUnfold) {
    const std::size_t C = 3, U = 3, V = 4, X = 5, Y = 6;
    const auto x = testutil::random_tensor<double>({C, U, V, X, Y}, 1);
    const auto w = testutil::random_tensor<double>({4, C, 3, 3}, 2);
    const auto b = testutil::random_tensor<double>({4}, 3);
    for (PlaneKind k : kAllPlaneKinds) {
        const auto got = plane_conv(x, w, b, k);
        const auto mid = ad::permute(x, model::detail::kToChannelMid);
        const auto ref = ad::permute(unfold_features(ad::conv2d(fold_features(mid, k), w, b, 1, 1), k, U, V, X, Y),
                                     model::detail::kToChannelFirst);
        ASSERT_EQ(got.shape(), ref.shape());
        for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(got.data()[i], ref.data()[i], 1e-12) << to_string(k);
    }
}

TEST(PlaneConv, PointwiseMatchesConv2d) {
    const auto x = testutil::random_tensor<double>({3, 2, 2, 4, 5}, 4);
    const auto w = testutil::random_tensor<double>({5, 3, 1, 1}, 5);
    const auto b = testutil::random_tensor<double>({5}, 6);
    const auto got = pointwise_conv(x, w, b);
    const auto ref = ad::conv2d(ad::reshape(x, {1, 3, 4, 20}), w, b, 0, 0);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(got.data()[i], ref.data()[i], 1e-12);
}

TEST(FeatureFold, RoundTrip) {
    const auto f = testutil::random_tensor<float>({3, 4, 2, 5, 6}, 7);
    for (PlaneKind k : kAllPlaneKinds) {
        const auto b = fold_features(f, k);
        EXPECT_EQ(b.dim(1), 2u);
        EXPECT_EQ(unfold_features(b, k, 3, 4, 5, 6).data(), f.data()) << to_string(k);
    }
    EXPECT_THROW(unfold_features(fold_features(f, PlaneKind::SAI), PlaneKind::SAI, 3, 4, 6, 5), ad::DimensionError);
}

TEST(Mdfb, ShapeAndZero) {
    MDFNConfig cfg;
    auto params = init_params<float>(cfg);
    ad::NoGradGuard g;
    const auto y = mdfb_forward(testutil::random_tensor<float>({7, 7, 1, 24, 24}, 1), params, cfg, 0);
    EXPECT_EQ(y.shape(), (ad::Shape{7, 7, 80, 24, 24}));
    const auto z = mdfb_forward(Tensor<float>({7, 7, 80, 6, 6}, 0.0f), params, cfg, 1);
    for (float v : z.data()) EXPECT_EQ(v, 0.0f);
    EXPECT_THROW(mdfb_forward(Tensor<float>({7, 7, 3, 6, 6}), params, cfg, 1), ad::DimensionError);
}

TEST(Mdfb, IdentityKernelsStackInput) {
    MDFNConfig cfg;
    cfg.c = 4;  // one channel per branch
    auto params = init_params<double>(cfg);
    for (PlaneKind k : kAllPlaneKinds) {
        auto& w = params.at("mdfb0." + std::string(to_string(k)) + ".weight");
        std::fill(w.data().begin(), w.data().end(), 0.0);
        w.data()[4] = 1.0;  // centre tap of the 3x3 kernel
    }
    auto x = testutil::random_tensor<double>({3, 4, 1, 5, 6}, 2, 0.0, 1.0);
    const auto y = mdfb_forward(x, params, cfg, 0);
    ASSERT_EQ(y.shape(), (ad::Shape{3, 4, 4, 5, 6}));
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t v = 0; v < 4; ++v)
            for (std::size_t c = 0; c < 4; ++c)
                for (std::size_t p = 0; p < 30; ++p)
                    ASSERT_EQ(y.data()[((u * 4 + v) * 4 + c) * 30 + p], x.data()[(u * 4 + v) * 30 + p]);
}

TEST(Mdfn, FeaturesShapeDeterministicFinite) {
    MDFNConfig cfg;
    auto params = init_params<float>(cfg);
    const auto lr = testutil::random_tensor<float>({7, 7, 24, 24}, 3, 0.0f, 1.0f);
    ad::NoGradGuard g;
    const auto f1 = mdfn_features(lr, params, cfg);
    const auto f2 = mdfn_features(lr, params, cfg);
    EXPECT_EQ(f1.shape(), (ad::Shape{7, 7, 80, 24, 24}));
    EXPECT_EQ(f1.data(), f2.data());
    EXPECT_TRUE(all_finite(f1));
}

TEST(Dfb, ShapesAndNormalization) {
    MDFNConfig cfg;
    auto params = init_params<float>(cfg);
    const auto f = testutil::random_tensor<float>({7, 7, 80, 24, 24}, 4);
    ad::NoGradGuard g;
    const auto F = dfb_forward(f, params, cfg);
    EXPECT_EQ(F.shape(), (ad::Shape{49, 25, 48, 48}));
    const auto field = DynamicFilterField::from_tensor(F, 7, 7);
    EXPECT_EQ(field.d, 5u);
    double worst = 0;
    for (std::size_t uv = 0; uv < 49; ++uv)
        for (std::size_t p = 0; p < 48 * 48; ++p) {
            double s = 0;
            for (std::size_t t = 0; t < 25; ++t) s += F.data()[(uv * 25 + t) * 48 * 48 + p];
            worst = std::max(worst, std::abs(s - 1.0));
        }
    EXPECT_LT(worst, 1e-5);
    EXPECT_EQ(field.at(2, 3, 10, 11, 1, 4), F.data()[((17 * 25) + 1 * 5 + 4) * 48 * 48 + 10 * 48 + 11]);

    for (auto& v : params.at("dfb.conv2.weight").data()) v = 0;
    const auto U = dfb_forward(f, params, cfg);
    for (float v : U.data()) EXPECT_FLOAT_EQ(v, 0.04f);
}

TEST(DynamicFilters, MatchesSixLoopOracle) {
    const std::size_t U = 3, V = 3, X = 2, Y = 2, d = 3, r = 2;
    const auto F = testutil::random_tensor<double>({U * V, d * d, r * X, r * Y}, 5, 0.0, 1.0);
    const auto lr = testutil::random_tensor<double>({U, V, X, Y}, 6, 0.0, 1.0);
    const auto got = apply_dynamic_filters(F, lr, r);
    const auto ref = oracle::dynamic_filters(F.data(), lr.data(), U, V, X, Y, d, r);
    for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(got.data()[i], ref[i], 1e-12);
}

TEST(DynamicFilters, DeltaIsNearestUpsample) {
    const std::size_t U = 4, V = 5, X = 3, Y = 4, d = 5, r = 2;
    Tensor<float> F({U * V, d * d, r * X, r * Y}, 0.0f);
    const std::size_t P = r * X * r * Y;
    for (std::size_t uv = 0; uv < U * V; ++uv)
        for (std::size_t p = 0; p < P; ++p) F.data()[(uv * d * d + 12) * P + p] = 1.0f;
    const auto lf = testutil::random_lf({U, V, X, Y, 1}, 7);
    const auto out = to_light_field(apply_dynamic_filters(F, to_tensor(lf), r));
    const auto nn = nearest_upsample(lf, r);
    EXPECT_TRUE(std::equal(out.data().begin(), out.data().end(), nn.data().begin()));
}

TEST(DynamicFilters, PartitionOfUnityOnInteriorViews) {
    const std::size_t U = 5, V = 5, X = 2, Y = 3, d = 3, r = 2;
    auto F = testutil::random_tensor<double>({U * V, d * d, r * X, r * Y}, 8, 0.0, 1.0);
    const std::size_t P = r * X * r * Y;
    for (std::size_t uv = 0; uv < U * V; ++uv)
        for (std::size_t p = 0; p < P; ++p) {
            double s = 0;
            for (std::size_t t = 0; t < d * d; ++t) s += F.data()[(uv * d * d + t) * P + p];
            for (std::size_t t = 0; t < d * d; ++t) F.data()[(uv * d * d + t) * P + p] /= s;
        }
    const auto out = apply_dynamic_filters(F, Tensor<double>({U, V, X, Y}, 0.6), r);
    for (std::size_t u = 1; u + 1 < U; ++u)
        for (std::size_t v = 1; v + 1 < V; ++v)
            for (std::size_t p = 0; p < P; ++p) EXPECT_NEAR(out.data()[(u * V + v) * P + p], 0.6, 1e-12);
}

TEST(Rb, ShapeZeroFinite) {
    MDFNConfig cfg;
    auto params = init_params<float>(cfg);
    const auto f = testutil::random_tensor<float>({7, 7, 80, 24, 24}, 9);
    ad::NoGradGuard g;
    const auto R = rb_forward(f, params, cfg);
    EXPECT_EQ(R.shape(), (ad::Shape{7, 7, 48, 48}));
    EXPECT_TRUE(all_finite(R));
    for (auto& v : params.at("rb.conv2.weight").data()) v = 0;
    const auto R0 = rb_forward(f, params, cfg);
    for (float v : R0.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Forward, ShapesAtBothScales) {
    auto cfg = small_config();
    for (std::size_t r : {2u, 4u}) {
        cfg.r = r;
        auto params = init_params<float>(cfg);
        ad::NoGradGuard g;
        const auto y = forward(testutil::random_tensor<float>({7, 7, 24, 24}, 10, 0.0f, 1.0f), params, cfg);
        EXPECT_EQ(y.shape(), (ad::Shape{7, 7, 24 * r, 24 * r}));
        EXPECT_TRUE(all_finite(y));
    }
    cfg.r = 2;
    cfg.upsampler = Upsampler::Deconvolution;
    auto params = init_params<float>(cfg);
    ad::NoGradGuard g;
    EXPECT_EQ(forward(testutil::random_tensor<float>({7, 7, 12, 12}, 11), params, cfg).shape(), (ad::Shape{7, 7, 24, 24}));
}

TEST(Forward, DeltaModelIsNearestUpsample) {
    MDFNConfig cfg;
    auto params = init_params<float>(cfg);
    oracle::make_delta_model(params, cfg);
    const auto lf = testutil::random_lf({7, 7, 8, 8, 1}, 12);
    const auto sr = super_resolve(lf, params, cfg);
    const auto nn = nearest_upsample(lf, 2);
    EXPECT_TRUE(std::equal(sr.data().begin(), sr.data().end(), nn.data().begin()));
}

TEST(Forward, EndToEndGradient) {
    for (const auto& c : gradsuite::model_cases()) {
        EXPECT_GT(c.coords, 0u) << c.name;
        EXPECT_LT(c.rel_error, 1e-3) << c.name;
    }
    for (const auto& c : gradsuite::model_cases(Upsampler::Deconvolution)) EXPECT_LT(c.rel_error, 1e-3) << c.name;
}
