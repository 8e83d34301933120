#pragma once

// Finite-difference checks for every differentiable op and the tiny
// end-to-end model, in double precision.

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lfmdfn/ad/grad_check.hpp"
#include "lfmdfn/ad/ops.hpp"
#include "lfmdfn/ad/params.hpp"
#include "lfmdfn/model/mdfn.hpp"
#include "test_util.hpp"

namespace gradsuite {

using T = double;
using Tn = lfmdfn::ad::Tensor<T>;
namespace ad = lfmdfn::ad;

struct Case {
    std::string name;
    double rel_error = 0;
    std::size_t coords = 0;
};

// Random tensor whose entries stay at least `gap` away from zero, so
// piecewise-linear ops are probed away from their kinks.
inline Tn away_from_zero(ad::Shape s, std::uint64_t seed, double gap = 0.1) {
    Tn t = testutil::random_tensor<T>(std::move(s), seed);
    for (auto& v : t.data()) v = v < 0 ? v - gap : v + gap;
    return t;
}

// Scalar probe sum(y * R) with a fixed random R, so every output entry matters.
inline Tn probe(const Tn& y, std::uint64_t seed) {
    static std::map<std::pair<ad::Shape, std::uint64_t>, Tn> cache;
    auto key = std::make_pair(y.shape(), seed);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(key, testutil::random_tensor<T>(y.shape(), seed)).first;
    return ad::sum(ad::mul(y, it->second));
}

inline void check(std::vector<Case>& out, const std::string& name, const std::function<Tn()>& f,
                  std::vector<Tn*> inputs, double eps = 1e-5, std::size_t max_coords = 0) {
    Case c{name, 0, 0};
    for (Tn* x : inputs) {
        const auto r = ad::grad_check<T>(f, *x, eps, max_coords);
        c.rel_error = std::max(c.rel_error, r.max_rel_error);
        c.coords += r.checked;
    }
    out.push_back(c);
}

inline std::vector<Case> op_cases() {
    std::vector<Case> out;
    using lfmdfn::PlaneKind;

    {
        Tn x = testutil::random_tensor<T>({2, 3, 4}, 1);
        check(out, "reshape", [&] { return probe(ad::reshape(x, {4, 6}), 2); }, {&x});
        check(out, "permute", [&] { return probe(ad::permute(x, {2, 0, 1}), 3); }, {&x});
        check(out, "scale", [&] { return probe(ad::scale(x, T(-1.7)), 4); }, {&x});
        check(out, "sum", [&] { return ad::sum(x); }, {&x});
    }
    {
        Tn a = testutil::random_tensor<T>({3, 5}, 5), b = testutil::random_tensor<T>({3, 5}, 6);
        check(out, "add", [&] { return probe(ad::add(a, b), 7); }, {&a, &b});
        check(out, "mul", [&] { return probe(ad::mul(a, b), 8); }, {&a, &b});
        Tn c = testutil::random_tensor<T>({2, 5}, 9);
        check(out, "concat", [&] { return probe(ad::concat(std::vector<Tn>{a, c}, 0), 10); }, {&a, &c});
    }
    {
        Tn x = testutil::random_tensor<T>({2, 3, 5, 4}, 11);
        Tn w = testutil::random_tensor<T>({4, 3, 3, 3}, 12), b = testutil::random_tensor<T>({4}, 13);
        check(out, "conv2d", [&] { return probe(ad::conv2d(x, w, b, 1, 1), 14); }, {&x, &w, &b});
        check(out, "conv2d_sum", [&] { return ad::sum(ad::conv2d(x, w, b, 0, 1)); }, {&x, &w, &b});
        Tn wt = testutil::random_tensor<T>({3, 2, 4, 4}, 15), bt = testutil::random_tensor<T>({2}, 16);
        check(out, "conv_transpose2d", [&] { return probe(ad::conv_transpose2d(x, wt, bt, 2, 1), 17); },
              {&x, &wt, &bt});
    }
    {
        Tn x = away_from_zero({2, 3, 4, 2}, 18), a = testutil::random_tensor<T>({3}, 19, 0.05, 0.5);
        check(out, "prelu", [&] { return probe(ad::prelu(x, a), 20); }, {&x, &a});
        Tn x0 = away_from_zero({3, 2, 5}, 21);
        check(out, "prelu_axis0", [&] { return probe(ad::prelu(x0, a, 0), 22); }, {&x0, &a});
    }
    {
        Tn x = testutil::random_tensor<T>({2, 5, 3, 2}, 23, -2.0, 2.0);
        check(out, "softmax", [&] { return probe(ad::softmax(x, 1), 24); }, {&x});
    }
    {
        Tn x = testutil::random_tensor<T>({2, 8, 3, 2}, 25);
        check(out, "pixel_shuffle", [&] { return probe(ad::pixel_shuffle(x, 2), 26); }, {&x});
        Tn y = testutil::random_tensor<T>({2, 2, 6, 4}, 27);
        check(out, "pixel_unshuffle", [&] { return probe(ad::pixel_unshuffle(y, 2), 28); }, {&y});
    }
    {
        Tn x = testutil::random_tensor<T>({3, 4, 5}, 29), y = testutil::random_tensor<T>({3, 4, 5}, 30);
        for (std::size_t i = 0; i < x.size(); ++i)
            if (std::abs(x.data()[i] - y.data()[i]) < 0.05) y.data()[i] += 0.1;
        check(out, "l1_loss", [&] { return ad::l1_loss(x, y); }, {&x, &y});
    }
    {
        Tn x = testutil::random_tensor<T>({2, 3, 4, 5, 3}, 31);
        Tn w = testutil::random_tensor<T>({3, 2, 3, 3}, 32), b = testutil::random_tensor<T>({3}, 33);
        for (PlaneKind k : lfmdfn::kAllPlaneKinds)
            check(out, std::string("plane_conv_") + lfmdfn::to_string(k),
                  [&] { return probe(lfmdfn::model::plane_conv(x, w, b, k), 34); }, {&x, &w, &b});
        Tn w1 = testutil::random_tensor<T>({4, 2, 1, 1}, 35), b1 = testutil::random_tensor<T>({4}, 36);
        check(out, "pointwise_conv", [&] { return probe(lfmdfn::model::pointwise_conv(x, w1, b1), 37); },
              {&x, &w1, &b1});
    }
    {
        Tn f = testutil::random_tensor<T>({3 * 4, 9, 4, 6}, 38), lr = testutil::random_tensor<T>({3, 4, 2, 3}, 39);
        check(out, "apply_dynamic_filters", [&] { return probe(lfmdfn::model::apply_dynamic_filters(f, lr, 2), 40); },
              {&f, &lr});
    }
    {
        Tn x = testutil::random_tensor<T>({3, 3, 2, 4, 4}, 41);
        for (PlaneKind k : lfmdfn::kAllPlaneKinds)
            check(out, std::string("fold_features_") + lfmdfn::to_string(k), [&] {
                Tn b = lfmdfn::model::fold_features(x, k);
                return probe(lfmdfn::model::unfold_features(ad::scale(b, T(2)), k, 3, 3, 4, 4), 42);
            }, {&x});
    }
    return out;
}

/// Tiny model: n=2, c=8, d=3 on a 3x3x6x6 light field; every parameter
/// tensor and the input are probed.
inline std::vector<Case> model_cases(lfmdfn::model::Upsampler up = lfmdfn::model::Upsampler::DynamicFilter) {
    lfmdfn::model::MDFNConfig cfg;
    cfg.n = 2;
    cfg.c = 8;
    cfg.d = 3;
    cfg.dfb_mid_channels = 4;
    cfg.rb_mid_channels = 4;
    cfg.upsampler = up;
    auto params = lfmdfn::model::init_params<T>(cfg);
    // Non-zero biases so that every bias gradient is exercised off the init point.
    std::uint64_t s = 100;
    for (auto& [name, p] : params)
        if (name.ends_with(".bias"))
            for (auto& v : p.data()) v = testutil::random_tensor<T>({1}, s++, -0.1, 0.1).item();
    Tn lr = testutil::random_tensor<T>({3, 3, 6, 6}, 50, 0.0, 1.0);
    // The target sits far above any output, so the L1 kink is never crossed.
    Tn target = testutil::random_tensor<T>({3, 3, 12, 12}, 51, 5.0, 6.0);
    auto f = [&] { return ad::l1_loss(lfmdfn::model::forward(lr, params, cfg), target); };

    std::vector<Case> out;
    for (auto& [name, p] : params) {
        Case c{"model." + name, 0, 0};
        const auto r = ad::grad_check<T>(f, p, 1e-6, 12);
        c.rel_error = r.max_rel_error;
        c.coords = r.checked;
        out.push_back(c);
    }
    Case c{"model.input", 0, 0};
    const auto r = ad::grad_check<T>(f, lr, 1e-6, 24);
    c.rel_error = r.max_rel_error;
    c.coords = r.checked;
    out.push_back(c);
    return out;
}

}  // namespace gradsuite
