#pragma once

#include "gavn/autodiff.hpp"

namespace gavn {

// Bias-corrected Adam over a named subset of parameters. Moment tensors are
// keyed by parameter name so they serialize alongside the weights.
template <class T>
struct AdamState {
    struct Moments {
        Tensor4<T> m, v;
    };
    std::map<std::string, Moments> moments;
    std::int64_t step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    void reset() {
        moments.clear();
        step = 0;
    }
};

template <class T>
void adam_step(ParamStore<T>& params, const std::vector<std::string>& names, AdamState<T>& state,
               double lr) {
    state.step += 1;
    double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (const std::string& name : names) {
        Var<T> p = params.get(name);
        p->ensure_grad();
        auto [it, fresh] = state.moments.try_emplace(name);
        if (fresh) {
            it->second.m = Tensor4<T>(p->val.shape);
            it->second.v = Tensor4<T>(p->val.shape);
        }
        Tensor4<T>& m = it->second.m;
        Tensor4<T>& v = it->second.v;
        for (std::size_t i = 0; i < p->val.v.size(); ++i) {
            double g = double(p->grad.v[i]);
            if (!std::isfinite(g))
                throw std::runtime_error("adam_step: non-finite gradient in parameter '" + name +
                                         "'");
            double mi = state.beta1 * double(m.v[i]) + (1.0 - state.beta1) * g;
            double vi = state.beta2 * double(v.v[i]) + (1.0 - state.beta2) * g * g;
            m.v[i] = T(mi);
            v.v[i] = T(vi);
            p->val.v[i] = T(double(p->val.v[i]) - lr * (mi / bc1) / (std::sqrt(vi / bc2) + state.eps));
        }
    }
}

}  // namespace gavn
