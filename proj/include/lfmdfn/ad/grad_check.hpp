#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lfmdfn/ad/tensor.hpp"

namespace lfmdfn::ad {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    std::size_t checked = 0;
};

/// Compares the reverse-mode gradient of scalar `f` wrt `x` against central
/// finite differences. `f` must rebuild its graph on every call.
///
/// Relative error per coordinate is |a-n| / max(|a|, |n|, floor), so
/// coordinates whose true gradient is ~0 are judged on absolute error.
/// With `max_coords` > 0 only an evenly spaced subset of coordinates is probed.
template <class T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& f, Tensor<T>& x, double eps = 1e-3,
                           std::size_t max_coords = 0, double floor = 1e-6) {
    x.set_requires_grad(true);
    x.zero_grad();
    Tensor<T> y = f();
    y.backward();
    const std::vector<T> analytic = x.grad();
    x.zero_grad();

    GradCheckResult res;
    const std::size_t n = x.size();
    const std::size_t stride = (max_coords == 0 || max_coords >= n) ? 1 : n / max_coords;
    for (std::size_t i = 0; i < n; i += stride) {
        const T orig = x.data()[i];
        x.data()[i] = static_cast<T>(orig + eps);
        const double fp = f().item();
        x.data()[i] = static_cast<T>(orig - eps);
        const double fm = f().item();
        x.data()[i] = orig;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double a = analytic[i];
        const double abs_err = std::abs(a - numeric);
        const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
        res.max_abs_error = std::max(res.max_abs_error, abs_err);
        res.max_rel_error = std::max(res.max_rel_error, rel);
        ++res.checked;
    }
    return res;
}

}  // namespace lfmdfn::ad
