#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "seastereo/nn/tensor.hpp"

namespace seastereo::nn {

// Define-by-run tape. Ops build Nodes whose `backprop` pulls this node's
// gradient and accumulates into the parents' gradients.
template <typename T>
struct Node {
    Tensor<T> value;
    Tensor<T> grad;  // allocated lazily
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void()> backprop;
    std::string name;  // set for parameters

    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor<T>::zeros(value.shape);
    }
    void zero_grad() {
        if (!grad.data.empty()) std::fill(grad.data.begin(), grad.data.end(), T(0));
    }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

template <typename T>
Var<T> make_leaf(Tensor<T> value, bool requires_grad = false, std::string name = "") {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    n->requires_grad = requires_grad;
    n->name = std::move(name);
    return n;
}

template <typename T>
Var<T> make_const(Tensor<T> value) {
    return make_leaf<T>(std::move(value), false);
}

// New leaf sharing this node's value; gradients do not flow through.
template <typename T>
Var<T> detach(const Var<T>& v) {
    return make_leaf<T>(v->value, false);
}

template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents,
               std::function<void()> backprop) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    for (const auto& p : parents) n->requires_grad = n->requires_grad || p->requires_grad;
    n->parents = std::move(parents);
    if (n->requires_grad) n->backprop = std::move(backprop);
    return n;
}

// Reverse-mode sweep from a scalar root. Gradients accumulate into every
// reachable node with requires_grad (parameters keep theirs until zeroed).
template <typename T>
void backward(const Var<T>& root) {
    if (root->value.numel() != 1)
        raise(ErrorCode::Internal, "backward: root must be scalar, got " +
                                       root->value.shape_str());
    if (!root->requires_grad) return;

    // Iterative post-order DFS for the topological order.
    std::vector<Node<T>*> topo;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, size_t>> stack;
    stack.push_back({root.get(), 0});
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node<T>* p = node->parents[next++].get();
            if (p->requires_grad && !visited.count(p)) {
                visited.insert(p);
                stack.push_back({p, 0});
            }
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad.data[0] += T(1);
    for (auto it = topo.rbegin(); it != topo.rend(); ++it)
        if ((*it)->backprop) (*it)->backprop();
}

}  // namespace seastereo::nn
