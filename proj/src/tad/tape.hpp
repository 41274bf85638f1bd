#pragma once

#include "tad/tensor.hpp"

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

namespace detours::tad {

template <class S>
struct Node;

template <class S>
using Var = std::shared_ptr<Node<S>>;

// One recorded value in the computation graph. Gradients accumulate
// additively across backward calls until zero_grad.
template <class S>
struct Node {
    Tensor<S> value;
    Tensor<S> grad; // allocated lazily, same shape as value
    bool requires_grad = false;
    bool is_leaf = true;
    std::vector<Var<S>> parents;
    std::function<void(Node<S>&)> backward_fn;

    void ensure_grad() {
        if (grad.shape != value.shape) grad = Tensor<S>(value.shape);
    }
};

template <class S>
Var<S> make_leaf(Tensor<S> value, bool requires_grad) {
    auto n = std::make_shared<Node<S>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->is_leaf = true;
    return n;
}

// Records operations in creation order, which is already a topological
// order of the DAG; backward walks it once in reverse. A Tape with
// gradients disabled skips all bookkeeping (evaluation fast path).
template <class S>
class Tape {
public:
    explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

    bool grad_enabled() const { return grad_enabled_; }

    Var<S> record(Tensor<S> value, std::vector<Var<S>> parents,
                  std::function<void(Node<S>&)> backward_fn) {
        auto n = std::make_shared<Node<S>>();
        n->value = std::move(value);
        n->is_leaf = false;
        if (grad_enabled_) {
            for (const auto& p : parents)
                if (p->requires_grad) {
                    n->requires_grad = true;
                    break;
                }
            if (n->requires_grad) {
                n->parents = std::move(parents);
                n->backward_fn = std::move(backward_fn);
                nodes_.push_back(n);
            }
        }
        return n;
    }

    // Seeds d(root)/d(root) = 1 and accumulates into every reachable
    // node's grad, visiting each recorded node exactly once.
    void backward(const Var<S>& root) {
        if (root->value.numel() != 1)
            throw ShapeMismatch("backward root must be scalar, got " +
                                shape_str(root->value.shape));
        if (!root->requires_grad) return;
        root->ensure_grad();
        root->grad.data[0] += S(1);

        std::unordered_set<const Node<S>*> reachable;
        std::vector<const Node<S>*> stack{root.get()};
        while (!stack.empty()) {
            const Node<S>* n = stack.back();
            stack.pop_back();
            if (!n->requires_grad || !reachable.insert(n).second) continue;
            for (const auto& p : n->parents) stack.push_back(p.get());
        }

        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            Node<S>& n = **it;
            if (!n.backward_fn || !reachable.count(&n)) continue;
            if (n.grad.shape != n.value.shape) continue; // no gradient flowed here
            n.backward_fn(n);
        }
    }

    size_t size() const { return nodes_.size(); }
    void clear() { nodes_.clear(); }

private:
    std::vector<Var<S>> nodes_;
    bool grad_enabled_;
};

template <class S>
void zero_grad(const std::vector<Var<S>>& params) {
    for (const auto& p : params) {
        p->ensure_grad();
        p->grad.fill(S(0));
    }
}

} // namespace detours::tad
