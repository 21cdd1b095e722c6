#pragma once

#include "gavn/conv.hpp"
#include "gavn/deform.hpp"

namespace gavn {

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Weight init: zero-mean normal with variance 2/fan_in, seeded from the
// parameter name so creation order cannot change the stream. Offset heads
// and output projections are zero-initialized instead.
template <class T>
Var<T> make_weight(ParamStore<T>& ps, const std::string& name, Shape4 shape, int fan_in,
                   std::uint64_t seed, bool zero_init) {
    Tensor4<T> w(shape);
    if (!zero_init) {
        Rng rng(mix_seed(seed, fnv1a(name)));
        double sd = std::sqrt(2.0 / double(fan_in));
        for (auto& v : w.v) v = T(rng.normal() * sd);
    }
    return ps.create(name, w);
}

template <class T>
struct Conv2dLayer {
    Var<T> w, b;
    int stride = 1, pad = 1;

    Var<T> operator()(const Var<T>& x) const { return conv2d(x, w, b, stride, pad); }
};

template <class T>
Conv2dLayer<T> conv2d_layer(ParamStore<T>& ps, const std::string& name, int in_ch, int out_ch,
                            int k, int stride, std::uint64_t seed, bool zero_init = false) {
    Conv2dLayer<T> l;
    l.w = make_weight(ps, name + ".w", {out_ch, in_ch, k, k}, in_ch * k * k, seed, zero_init);
    l.b = ps.create(name + ".b", Tensor4<T>(1, out_ch, 1, 1));
    l.stride = stride;
    l.pad = k / 2;
    return l;
}

template <class T>
struct Conv1dLayer {
    Var<T> w, b;
    int stride = 1, pad = 0;

    Var<T> operator()(const Var<T>& x) const { return conv1d(x, w, b, stride, pad); }
};

template <class T>
Conv1dLayer<T> conv1d_layer(ParamStore<T>& ps, const std::string& name, int in_ch, int out_ch,
                            int k, int stride, std::uint64_t seed, bool zero_init = false) {
    Conv1dLayer<T> l;
    l.w = make_weight(ps, name + ".w", {out_ch, in_ch, 1, k}, in_ch * k, seed, zero_init);
    l.b = ps.create(name + ".b", Tensor4<T>(1, out_ch, 1, 1));
    l.stride = stride;
    l.pad = k / 2;
    return l;
}

}  // namespace gavn
