#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace lfmdfn::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ')';
    return os.str();
}

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

namespace detail {

template <class T>
struct Node {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents' grads.
    std::function<void(Node&)> backward_fn;

    std::vector<T>& ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        return grad;
    }
};

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

}  // namespace detail

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

/// Dense row-major tensor with reverse-mode gradient tracking.
///
/// Copies share the underlying node (handle semantics, like a framework
/// variable). Gradients accumulate additively across every use of a tensor
/// in the graph; call `zero_grad()` between steps.
template <class T>
class Tensor {
public:
    using value_type = T;
    using Node = detail::Node<T>;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
        : node_(std::make_shared<Node>()) {
        node_->data.assign(numel(shape), fill);
        node_->shape = std::move(shape);
        node_->requires_grad = requires_grad;
    }

    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false)
        : node_(std::make_shared<Node>()) {
        if (data.size() != numel(shape))
            throw DimensionError("tensor data length " + std::to_string(data.size()) +
                                 " does not match shape " + shape_str(shape));
        node_->shape = std::move(shape);
        node_->data = std::move(data);
        node_->requires_grad = requires_grad;
    }

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const { return node_->shape; }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }

    std::vector<T>& data() { return node_->data; }
    const std::vector<T>& data() const { return node_->data; }
    T* ptr() { return node_->data.data(); }
    const T* ptr() const { return node_->data.data(); }

    bool has_grad() const { return node_->grad.size() == node_->data.size(); }
    std::vector<T>& grad() { return node_->ensure_grad(); }
    const std::vector<T>& grad() const { return node_->ensure_grad(); }
    void zero_grad() { node_->grad.clear(); }

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }

    T item() const {
        if (size() != 1) throw DimensionError("item() on tensor of shape " + shape_str(shape()));
        return node_->data[0];
    }

    /// Same storage, no graph history. Useful for feeding a value into a fresh graph.
    Tensor detach() const {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = node_->shape;
        t.node_->data = node_->data;
        return t;
    }

    /// Runs reverse accumulation from this scalar.
    void backward() {
        if (size() != 1) throw DimensionError("backward() requires a scalar, got " + shape_str(shape()));
        backward_with(std::vector<T>{T(1)});
    }

    /// Runs reverse accumulation with an explicit upstream gradient.
    void backward_with(const std::vector<T>& seed) {
        if (seed.size() != size()) throw DimensionError("seed gradient size mismatch");
        std::vector<Node*> order;
        topo_sort(order);
        auto& g = node_->ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node* n = *it;
            if (n->backward_fn && n->grad.size() == n->data.size()) n->backward_fn(*n);
        }
    }

    /// Builds a result tensor whose gradient flows into `parents` via `fn`.
    static Tensor make_result(Shape shape, std::vector<T> data, std::vector<Tensor> parents,
                              std::function<void(Node&)> fn) {
        Tensor out(std::move(shape), std::move(data));
        bool any = false;
        if (!detail::grad_mode()) return out;
        for (const auto& p : parents) any = any || p.node_->requires_grad;
        if (any) {
            out.node_->requires_grad = true;
            for (auto& p : parents) out.node_->parents.push_back(p.node_);
            out.node_->backward_fn = std::move(fn);
        }
        return out;
    }

    Node& node() { return *node_; }
    const Node& node() const { return *node_; }
    const std::shared_ptr<Node>& node_ptr() const { return node_; }

private:
    void topo_sort(std::vector<Node*>& order) const {
        std::unordered_set<Node*> seen;
        // Iterative post-order DFS; graphs can be a few hundred nodes deep.
        std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->parents.size()) {
                Node* p = n->parents[next++].get();
                if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<Node> node_;
};

/// Accumulates `g` into a parent's grad if that parent participates in autodiff.
template <class T>
inline std::vector<T>* grad_sink(detail::Node<T>& n) {
    return n.requires_grad ? &n.ensure_grad() : nullptr;
}

}  // namespace lfmdfn::ad
