#pragma once

#include "gavn/ops.hpp"

namespace gavn {

struct GradCheckReport {
    double max_rel_error = 0.0;
    bool pass = false;
    bool finite = true;
    std::string worst_location;
};

// Central finite-difference check of a scalar-valued function against the
// tape gradients. fn must rebuild its graph from the given leaves on every
// call; anything else it closes over is held constant. Relative error uses
// a small absolute floor so near-zero gradient pairs compare sanely.
template <class T>
GradCheckReport grad_check(const std::function<Var<T>(const std::vector<Var<T>>&)>& fn,
                           const std::vector<Tensor4<T>>& inputs, double tolerance,
                           double step = 1e-4) {
    GradCheckReport rep;

    std::vector<Var<T>> leaves;
    leaves.reserve(inputs.size());
    for (const auto& t : inputs) leaves.push_back(make_var(t, true));
    Var<T> loss = fn(leaves);
    check(loss->val.shape == Shape4{1, 1, 1, 1}, "grad_check: fn must return a scalar");
    backward(loss);

    std::vector<Tensor4<T>> analytic;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        leaves[i]->ensure_grad();
        analytic.push_back(leaves[i]->grad);
        for (std::size_t e = 0; e < analytic[i].v.size(); ++e)
            if (!std::isfinite(double(analytic[i].v[e]))) {
                rep.finite = false;
                rep.pass = false;
                rep.max_rel_error = std::numeric_limits<double>::infinity();
                rep.worst_location =
                    "input#" + std::to_string(i) + "[" + std::to_string(e) + "]: non-finite analytic gradient";
                return rep;
            }
    }

    auto eval = [&](const std::vector<Tensor4<T>>& vals) {
        std::vector<Var<T>> vs;
        vs.reserve(vals.size());
        for (const auto& t : vals) vs.push_back(make_var(t, false));
        return double(fn(vs)->val.v[0]);
    };

    std::vector<Tensor4<T>> work = inputs;
    for (std::size_t i = 0; i < work.size(); ++i) {
        for (std::size_t e = 0; e < work[i].v.size(); ++e) {
            T keep = work[i].v[e];
            work[i].v[e] = keep + T(step);
            double fp = eval(work);
            work[i].v[e] = keep - T(step);
            double fm = eval(work);
            work[i].v[e] = keep;
            double numeric = (fp - fm) / (2.0 * step);
            double a = double(analytic[i].v[e]);
            double rel = std::abs(a - numeric) / std::max({1e-6, std::abs(a), std::abs(numeric)});
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_location = "input#" + std::to_string(i) + "[" + std::to_string(e) + "]";
            }
        }
    }
    rep.pass = rep.finite && rep.max_rel_error <= tolerance;
    return rep;
}

// Same check against leaves that already live in a model (parameters or
// captured inputs): fn must re-run the forward pass reading the leaves'
// current values each call. Values are perturbed in place.
template <class T>
GradCheckReport grad_check_inplace(const std::function<Var<T>()>& fn,
                                   const std::vector<Var<T>>& leaves, double tolerance,
                                   double step = 1e-4) {
    GradCheckReport rep;
    for (const auto& l : leaves) {
        check(l->requires_grad, "grad_check_inplace: leaf must require grad");
        l->ensure_grad();
        std::fill(l->grad.v.begin(), l->grad.v.end(), T(0));
    }
    Var<T> loss = fn();
    check(loss->val.shape == Shape4{1, 1, 1, 1}, "grad_check_inplace: fn must return a scalar");
    backward(loss);

    std::vector<Tensor4<T>> analytic;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        analytic.push_back(leaves[i]->grad);
        for (std::size_t e = 0; e < analytic[i].v.size(); ++e)
            if (!std::isfinite(double(analytic[i].v[e]))) {
                rep.finite = false;
                rep.max_rel_error = std::numeric_limits<double>::infinity();
                rep.worst_location = "leaf#" + std::to_string(i) + "[" + std::to_string(e) +
                                     "]: non-finite analytic gradient";
                return rep;
            }
    }

    for (std::size_t i = 0; i < leaves.size(); ++i) {
        for (std::size_t e = 0; e < leaves[i]->val.v.size(); ++e) {
            T keep = leaves[i]->val.v[e];
            leaves[i]->val.v[e] = keep + T(step);
            double fp = double(fn()->val.v[0]);
            leaves[i]->val.v[e] = keep - T(step);
            double fm = double(fn()->val.v[0]);
            leaves[i]->val.v[e] = keep;
            double numeric = (fp - fm) / (2.0 * step);
            double a = double(analytic[i].v[e]);
            double rel = std::abs(a - numeric) / std::max({1e-6, std::abs(a), std::abs(numeric)});
            if (rel > rep.max_rel_error) {
                rep.max_rel_error = rel;
                rep.worst_location = "leaf#" + std::to_string(i) + "[" + std::to_string(e) + "]";
            }
        }
    }
    rep.pass = rep.finite && rep.max_rel_error <= tolerance;
    return rep;
}

// Fills a tensor with uniform values in [lo, hi); the default projection
// generator for scalarizing operator outputs.
template <class T>
Tensor4<T> random_tensor(Shape4 s, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor4<T> t(s);
    for (auto& x : t.v) x = T(rng.uniform(lo, hi));
    return t;
}

}  // namespace gavn
