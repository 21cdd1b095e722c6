#pragma once

#include <map>
#include <memory>
#include <unordered_set>

#include "gavn/tensor.hpp"

namespace gavn {

// Reverse-mode tape over Tensor4. Each operation returns a new node holding
// its value and a closure that scatters the node's gradient into its
// parents. This is not a general autodiff system: ops are out-of-place,
// graphs are DAGs built per forward pass and discarded after backward().
template <class T>
struct Node {
    Tensor4<T> val;
    Tensor4<T> grad;  // allocated on demand, same shape as val
    bool requires_grad = false;
    std::string name;  // non-empty for parameters
    std::vector<std::shared_ptr<Node<T>>> parents;
    std::function<void(Node<T>&)> backward_fn;

    void ensure_grad() {
        if (grad.empty()) grad = Tensor4<T>(val.shape);
    }

    void accumulate(const Tensor4<T>& g) {
        ensure_grad();
        for (std::size_t i = 0; i < grad.v.size(); ++i) grad.v[i] += g.v[i];
    }
};

template <class T>
using Var = std::shared_ptr<Node<T>>;

template <class T>
Var<T> make_var(Tensor4<T> value, bool requires_grad = false) {
    auto n = std::make_shared<Node<T>>();
    n->val = std::move(value);
    n->requires_grad = requires_grad;
    return n;
}

template <class T>
Var<T> make_const(Tensor4<T> value) {
    return make_var(std::move(value), false);
}

namespace detail {

template <class T>
void topo_visit(const Var<T>& n, std::unordered_set<Node<T>*>& seen,
                std::vector<Var<T>>& order) {
    if (!n || seen.count(n.get())) return;
    seen.insert(n.get());
    for (const auto& p : n->parents) topo_visit(p, seen, order);
    order.push_back(n);
}

}  // namespace detail

// Seeds d(loss)/d(loss) = 1 and runs every backward closure in reverse
// topological order. loss must be a scalar (1,1,1,1) node.
template <class T>
void backward(const Var<T>& loss) {
    check(loss->val.shape == Shape4{1, 1, 1, 1},
          "backward: loss must be scalar, got " + loss->val.shape.str());
    std::unordered_set<Node<T>*> seen;
    std::vector<Var<T>> order;
    detail::topo_visit(loss, seen, order);
    loss->ensure_grad();
    loss->grad.v[0] = T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node<T>& n = **it;
        if (n.backward_fn && n.requires_grad && !n.grad.empty()) n.backward_fn(n);
    }
}

// Named parameter collection. std::map keeps iteration (and therefore Adam
// updates, checkpoint manifests and weight-init streams) in a fixed order.
template <class T>
struct ParamStore {
    std::map<std::string, Var<T>> params;

    Var<T> create(const std::string& name, Tensor4<T> init) {
        check(!params.count(name), "duplicate parameter name: " + name);
        auto p = make_var(std::move(init), true);
        p->name = name;
        params[name] = p;
        return p;
    }

    Var<T> get(const std::string& name) const {
        auto it = params.find(name);
        check(it != params.end(), "unknown parameter name: " + name);
        return it->second;
    }

    void zero_grad() {
        for (auto& [name, p] : params) {
            (void)name;
            if (!p->grad.empty()) std::fill(p->grad.v.begin(), p->grad.v.end(), T(0));
        }
    }

    std::int64_t total_elems() const {
        std::int64_t n = 0;
        for (const auto& [name, p] : params) {
            (void)name;
            n += p->val.size();
        }
        return n;
    }
};

}  // namespace gavn
