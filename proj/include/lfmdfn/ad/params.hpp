#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lfmdfn/ad/tensor.hpp"

namespace lfmdfn::ad {

/// Named parameters in insertion order. Names are unique.
template <class T>
class ParamStore {
public:
    Tensor<T>& add(const std::string& name, Tensor<T> t) {
        if (index_.count(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        t.set_requires_grad(true);
        index_[name] = entries_.size();
        entries_.emplace_back(name, std::move(t));
        return entries_.back().second;
    }

    bool contains(const std::string& name) const { return index_.count(name) != 0; }

    Tensor<T>& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
        return entries_[it->second].second;
    }
    const Tensor<T>& at(const std::string& name) const {
        return const_cast<ParamStore*>(this)->at(name);
    }

    std::size_t size() const { return entries_.size(); }
    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [n, _] : entries_) out.push_back(n);
        return out;
    }

    std::size_t scalar_count() const {
        std::size_t total = 0;
        for (const auto& [_, t] : entries_) total += t.size();
        return total;
    }

    void zero_grad() {
        for (auto& [_, t] : entries_) t.zero_grad();
    }

    /// Copies values into a store of another precision.
    template <class U>
    ParamStore<U> cast() const {
        ParamStore<U> out;
        for (const auto& [n, t] : entries_) {
            std::vector<U> d(t.data().begin(), t.data().end());
            out.add(n, Tensor<U>(t.shape(), std::move(d)));
        }
        return out;
    }

private:
    std::vector<std::pair<std::string, Tensor<T>>> entries_;
    std::map<std::string, std::size_t> index_;
};

enum class FanMode { FanIn, FanOut };

/// He/Kaiming normal initialization for conv weights shaped (A,B,kh,kw) or (A,B).
///
/// With FanIn the fan is shape[1]*kh*kw; with FanOut it is shape[0]*kh*kw.
/// Draws are N(0, 2/fan), deterministic for a given seed.
template <class T>
Tensor<T> kaiming_init(const Shape& shape, FanMode mode, std::uint64_t seed, double fan_divisor = 1.0) {
    if (shape.size() < 2) throw DimensionError("kaiming_init: needs at least a 2D weight shape");
    for (auto e : shape)
        if (e == 0) throw DimensionError("kaiming_init: empty extent in " + shape_str(shape));
    std::size_t receptive = 1;
    for (std::size_t i = 2; i < shape.size(); ++i) receptive *= shape[i];
    const double fan = static_cast<double>((mode == FanMode::FanIn ? shape[1] : shape[0]) * receptive) / fan_divisor;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan));
    std::vector<T> data(numel(shape));
    for (auto& v : data) v = static_cast<T>(dist(rng));
    return Tensor<T>(shape, std::move(data));
}

/// Adam optimizer state; moment buffers are keyed by parameter name.
template <class T>
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::map<std::string, std::vector<T>> m, v;
};

struct MissingGradError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One bias-corrected Adam update over every parameter, then clears grads.
template <class T>
void adam_step(ParamStore<T>& params, AdamState<T>& st) {
    for (auto& [name, p] : params)
        if (!p.has_grad()) throw MissingGradError("adam_step: parameter '" + name + "' has no gradient");
    ++st.step;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (auto& [name, p] : params) {
        auto& m = st.m[name];
        auto& v = st.v[name];
        if (m.size() != p.size()) m.assign(p.size(), T(0));
        if (v.size() != p.size()) v.assign(p.size(), T(0));
        auto& g = p.grad();
        auto& w = p.data();
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = static_cast<T>(st.beta1 * m[i] + (1.0 - st.beta1) * g[i]);
            v[i] = static_cast<T>(st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i]);
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            w[i] = static_cast<T>(w[i] - st.lr * mhat / (std::sqrt(vhat) + st.eps));
        }
        p.zero_grad();
    }
}

}  // namespace lfmdfn::ad
