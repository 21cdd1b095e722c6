#pragma once

#include "gavn/autodiff.hpp"

namespace gavn {

// --- elementwise -----------------------------------------------------------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    check(a->val.same_shape(b->val),
          "add: shape mismatch " + a->val.shape.str() + " vs " + b->val.shape.str());
    auto out = make_var(Tensor4<T>(a->val.shape), a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = a->val.v[i] + b->val.v[i];
    out->parents = {a, b};
    out->backward_fn = [a, b](Node<T>& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) b->accumulate(n.grad);
    };
    return out;
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    check(a->val.same_shape(b->val),
          "sub: shape mismatch " + a->val.shape.str() + " vs " + b->val.shape.str());
    auto out = make_var(Tensor4<T>(a->val.shape), a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = a->val.v[i] - b->val.v[i];
    out->parents = {a, b};
    out->backward_fn = [a, b](Node<T>& n) {
        if (a->requires_grad) a->accumulate(n.grad);
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n.grad.v.size(); ++i) b->grad.v[i] -= n.grad.v[i];
        }
    };
    return out;
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    check(a->val.same_shape(b->val),
          "mul: shape mismatch " + a->val.shape.str() + " vs " + b->val.shape.str());
    auto out = make_var(Tensor4<T>(a->val.shape), a->requires_grad || b->requires_grad);
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = a->val.v[i] * b->val.v[i];
    out->parents = {a, b};
    out->backward_fn = [a, b](Node<T>& n) {
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < n.grad.v.size(); ++i)
                a->grad.v[i] += n.grad.v[i] * b->val.v[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < n.grad.v.size(); ++i)
                b->grad.v[i] += n.grad.v[i] * a->val.v[i];
        }
    };
    return out;
}

template <class T>
Var<T> scale(const Var<T>& a, double s) {
    auto out = make_var(Tensor4<T>(a->val.shape), a->requires_grad);
    for (std::size_t i = 0; i < out->val.v.size(); ++i) out->val.v[i] = T(a->val.v[i] * s);
    out->parents = {a};
    out->backward_fn = [a, s](Node<T>& n) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.v.size(); ++i) a->grad.v[i] += T(n.grad.v[i] * s);
    };
    return out;
}

// Hidden-layer activation, slope 0.1.
template <class T>
Var<T> leaky_relu(const Var<T>& a, double slope = 0.1) {
    auto out = make_var(Tensor4<T>(a->val.shape), a->requires_grad);
    for (std::size_t i = 0; i < out->val.v.size(); ++i) {
        T x = a->val.v[i];
        out->val.v[i] = x > T(0) ? x : T(slope) * x;
    }
    out->parents = {a};
    out->backward_fn = [a, slope](Node<T>& n) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.v.size(); ++i)
            a->grad.v[i] += a->val.v[i] > T(0) ? n.grad.v[i] : T(slope) * n.grad.v[i];
    };
    return out;
}

// Attention / gating nonlinearity.
template <class T>
Var<T> sigmoid(const Var<T>& a) {
    auto out = make_var(Tensor4<T>(a->val.shape), a->requires_grad);
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = T(1) / (T(1) + std::exp(-a->val.v[i]));
    out->parents = {a};
    out->backward_fn = [a](Node<T>& n) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.v.size(); ++i) {
            T y = n.val.v[i];
            a->grad.v[i] += n.grad.v[i] * y * (T(1) - y);
        }
    };
    return out;
}

// Smooth magnitude sqrt(x^2 + eps^2) - eps: exactly zero at zero, gradient
// defined everywhere. Rectifier for envelope pooling.
template <class T>
Var<T> smooth_abs(const Var<T>& a, double eps = 1e-3) {
    auto out = make_var(Tensor4<T>(a->val.shape), a->requires_grad);
    double e2 = eps * eps;
    for (std::size_t i = 0; i < out->val.v.size(); ++i) {
        double x = a->val.v[i];
        out->val.v[i] = T(std::sqrt(x * x + e2) - eps);
    }
    out->parents = {a};
    out->backward_fn = [a, e2](Node<T>& n) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.v.size(); ++i) {
            double x = a->val.v[i];
            a->grad.v[i] += T(double(n.grad.v[i]) * x / std::sqrt(x * x + e2));
        }
    };
    return out;
}

// Gradient passes through strictly inside (-limit, limit), zero outside.
template <class T>
Var<T> clamp_sym(const Var<T>& a, double limit) {
    auto out = make_var(Tensor4<T>(a->val.shape), a->requires_grad);
    T lim = T(limit);
    for (std::size_t i = 0; i < out->val.v.size(); ++i)
        out->val.v[i] = std::min(lim, std::max(-lim, a->val.v[i]));
    out->parents = {a};
    out->backward_fn = [a, lim](Node<T>& n) {
        if (!a->requires_grad) return;
        a->ensure_grad();
        for (std::size_t i = 0; i < n.grad.v.size(); ++i)
            if (a->val.v[i] > -lim && a->val.v[i] < lim) a->grad.v[i] += n.grad.v[i];
    };
    return out;
}

// --- shape ops --------------------------------------------------------------

template <class T>
Var<T> concat_ch(const std::vector<Var<T>>& xs) {
    check(!xs.empty(), "concat_ch: empty input list");
    Shape4 s0 = xs[0]->val.shape;
    int ctot = 0;
    bool rg = false;
    for (const auto& x : xs) {
        Shape4 s = x->val.shape;
        check(s.b == s0.b && s.h == s0.h && s.w == s0.w,
              "concat_ch: incompatible shapes " + s0.str() + " vs " + s.str());
        ctot += s.c;
        rg = rg || x->requires_grad;
    }
    auto out = make_var(Tensor4<T>(s0.b, ctot, s0.h, s0.w), rg);
    int coff = 0;
    for (const auto& x : xs) {
        for (int b = 0; b < s0.b; ++b)
            for (int c = 0; c < x->val.shape.c; ++c)
                std::copy(x->val.plane(b, c), x->val.plane(b, c) + std::size_t(s0.h) * s0.w,
                          out->val.plane(b, coff + c));
        coff += x->val.shape.c;
    }
    out->parents = xs;
    out->backward_fn = [xs, s0](Node<T>& n) {
        int coff2 = 0;
        for (const auto& x : xs) {
            if (x->requires_grad) {
                x->ensure_grad();
                std::size_t hw = std::size_t(s0.h) * s0.w;
                for (int b = 0; b < s0.b; ++b)
                    for (int c = 0; c < x->val.shape.c; ++c) {
                        const T* src = n.grad.plane(b, coff2 + c);
                        T* dst = x->grad.plane(b, c);
                        for (std::size_t i = 0; i < hw; ++i) dst[i] += src[i];
                    }
            }
            coff2 += x->val.shape.c;
        }
    };
    return out;
}

template <class T>
Var<T> concat_batch(const std::vector<Var<T>>& xs) {
    check(!xs.empty(), "concat_batch: empty input list");
    Shape4 s0 = xs[0]->val.shape;
    int btot = 0;
    bool rg = false;
    for (const auto& x : xs) {
        Shape4 s = x->val.shape;
        check(s.c == s0.c && s.h == s0.h && s.w == s0.w,
              "concat_batch: incompatible shapes " + s0.str() + " vs " + s.str());
        btot += s.b;
        rg = rg || x->requires_grad;
    }
    auto out = make_var(Tensor4<T>(btot, s0.c, s0.h, s0.w), rg);
    std::size_t off = 0;
    for (const auto& x : xs) {
        std::copy(x->val.v.begin(), x->val.v.end(), out->val.v.begin() + off);
        off += x->val.v.size();
    }
    out->parents = xs;
    out->backward_fn = [xs](Node<T>& n) {
        std::size_t off2 = 0;
        for (const auto& x : xs) {
            if (x->requires_grad) {
                x->ensure_grad();
                for (std::size_t i = 0; i < x->val.v.size(); ++i)
                    x->grad.v[i] += n.grad.v[off2 + i];
            }
            off2 += x->val.v.size();
        }
    };
    return out;
}

// Selects one batch row as a (1,C,H,W) view copy.
template <class T>
Var<T> select_frame(const Var<T>& x, int i) {
    Shape4 s = x->val.shape;
    check(i >= 0 && i < s.b, "select_frame: index out of range");
    auto out = make_var(Tensor4<T>(1, s.c, s.h, s.w), x->requires_grad);
    std::size_t n = out->val.v.size();
    std::copy(x->val.v.begin() + std::size_t(i) * n, x->val.v.begin() + std::size_t(i + 1) * n,
              out->val.v.begin());
    out->parents = {x};
    out->backward_fn = [x, i, n](Node<T>& nd) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t j = 0; j < n; ++j) x->grad.v[std::size_t(i) * n + j] += nd.grad.v[j];
    };
    return out;
}

// Width-axis slice [lo, hi); used to isolate the center frame's span of an
// audio feature sequence.
template <class T>
Var<T> slice_cols(const Var<T>& x, int lo, int hi) {
    Shape4 s = x->val.shape;
    check(0 <= lo && lo < hi && hi <= s.w, "slice_cols: bad range [" + std::to_string(lo) + ", " +
                                               std::to_string(hi) + ") for width " +
                                               std::to_string(s.w));
    auto out = make_var(Tensor4<T>(s.b, s.c, s.h, hi - lo), x->requires_grad);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c)
            for (int y = 0; y < s.h; ++y) {
                const T* src = x->val.plane(b, c) + std::size_t(y) * s.w + lo;
                T* dst = out->val.plane(b, c) + std::size_t(y) * (hi - lo);
                std::copy(src, src + (hi - lo), dst);
            }
    out->parents = {x};
    out->backward_fn = [x, s, lo, hi](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int b = 0; b < s.b; ++b)
            for (int c = 0; c < s.c; ++c)
                for (int y = 0; y < s.h; ++y) {
                    const T* src = n.grad.plane(b, c) + std::size_t(y) * (hi - lo);
                    T* dst = x->grad.plane(b, c) + std::size_t(y) * s.w + lo;
                    for (int i = 0; i < hi - lo; ++i) dst[i] += src[i];
                }
    };
    return out;
}

template <class T>
Var<T> flatten_chw(const Var<T>& x) {
    Shape4 s = x->val.shape;
    auto out = make_var(Tensor4<T>(s.b, s.c * s.h * s.w, 1, 1), x->requires_grad);
    out->val.v = x->val.v;
    out->parents = {x};
    out->backward_fn = [x](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (std::size_t i = 0; i < n.grad.v.size(); ++i) x->grad.v[i] += n.grad.v[i];
    };
    return out;
}

// (B, C*r*r, H, W) -> (B, C, H*r, W*r); standard sub-pixel interleaving.
template <class T>
Var<T> pixel_shuffle(const Var<T>& x, int r) {
    Shape4 s = x->val.shape;
    check(r >= 1, "pixel_shuffle: r must be >= 1");
    check(s.c % (r * r) == 0, "pixel_shuffle: channels " + std::to_string(s.c) +
                                  " not divisible by r^2=" + std::to_string(r * r));
    int co = s.c / (r * r);
    auto out = make_var(Tensor4<T>(s.b, co, s.h * r, s.w * r), x->requires_grad);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < co; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx) {
                    const T* src = x->val.plane(b, c * r * r + dy * r + dx);
                    for (int y = 0; y < s.h; ++y) {
                        T* dst = out->val.plane(b, c) + std::size_t(y * r + dy) * (s.w * r) + dx;
                        for (int xw = 0; xw < s.w; ++xw) dst[std::size_t(xw) * r] = src[std::size_t(y) * s.w + xw];
                    }
                }
    out->parents = {x};
    out->backward_fn = [x, s, co, r](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int b = 0; b < s.b; ++b)
            for (int c = 0; c < co; ++c)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx) {
                        T* dst = x->grad.plane(b, c * r * r + dy * r + dx);
                        for (int y = 0; y < s.h; ++y) {
                            const T* src = n.grad.plane(b, c) + std::size_t(y * r + dy) * (s.w * r) + dx;
                            for (int xw = 0; xw < s.w; ++xw) dst[std::size_t(y) * s.w + xw] += src[std::size_t(xw) * r];
                        }
                    }
    };
    return out;
}

// Exact inverse of pixel_shuffle.
template <class T>
Var<T> pixel_unshuffle(const Var<T>& x, int r) {
    Shape4 s = x->val.shape;
    check(r >= 1 && s.h % r == 0 && s.w % r == 0,
          "pixel_unshuffle: spatial dims must be divisible by r");
    int ho = s.h / r, wo = s.w / r;
    auto out = make_var(Tensor4<T>(s.b, s.c * r * r, ho, wo), x->requires_grad);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c)
            for (int dy = 0; dy < r; ++dy)
                for (int dx = 0; dx < r; ++dx) {
                    T* dst = out->val.plane(b, c * r * r + dy * r + dx);
                    const T* src = x->val.plane(b, c);
                    for (int y = 0; y < ho; ++y)
                        for (int xw = 0; xw < wo; ++xw)
                            dst[std::size_t(y) * wo + xw] = src[std::size_t(y * r + dy) * s.w + xw * r + dx];
                }
    out->parents = {x};
    out->backward_fn = [x, s, ho, wo, r](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int b = 0; b < s.b; ++b)
            for (int c = 0; c < s.c; ++c)
                for (int dy = 0; dy < r; ++dy)
                    for (int dx = 0; dx < r; ++dx) {
                        const T* src = n.grad.plane(b, c * r * r + dy * r + dx);
                        T* dst = x->grad.plane(b, c);
                        for (int y = 0; y < ho; ++y)
                            for (int xw = 0; xw < wo; ++xw)
                                dst[std::size_t(y * r + dy) * s.w + xw * r + dx] += src[std::size_t(y) * wo + xw];
                    }
    };
    return out;
}

// 2x2 average pool, stride 2. Used to build the in-module alignment pyramid.
template <class T>
Var<T> avg_pool2(const Var<T>& x) {
    Shape4 s = x->val.shape;
    check(s.h % 2 == 0 && s.w % 2 == 0, "avg_pool2: dims must be even, got " + s.str());
    int ho = s.h / 2, wo = s.w / 2;
    auto out = make_var(Tensor4<T>(s.b, s.c, ho, wo), x->requires_grad);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            const T* src = x->val.plane(b, c);
            T* dst = out->val.plane(b, c);
            for (int y = 0; y < ho; ++y)
                for (int xw = 0; xw < wo; ++xw) {
                    const T* p = src + std::size_t(2 * y) * s.w + 2 * xw;
                    dst[std::size_t(y) * wo + xw] = (p[0] + p[1] + p[s.w] + p[s.w + 1]) * T(0.25);
                }
        }
    out->parents = {x};
    out->backward_fn = [x, s, ho, wo](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int b = 0; b < s.b; ++b)
            for (int c = 0; c < s.c; ++c) {
                T* dst = x->grad.plane(b, c);
                const T* src = n.grad.plane(b, c);
                for (int y = 0; y < ho; ++y)
                    for (int xw = 0; xw < wo; ++xw) {
                        T g = src[std::size_t(y) * wo + xw] * T(0.25);
                        T* p = dst + std::size_t(2 * y) * s.w + 2 * xw;
                        p[0] += g;
                        p[1] += g;
                        p[s.w] += g;
                        p[s.w + 1] += g;
                    }
            }
    };
    return out;
}

namespace detail {

// Half-pixel-centered x2 bilinear taps: output o reads source base(o) with
// weight 1-frac(o) and base(o)+1 with weight frac(o), clamped at borders.
inline void up2_taps(int o, int n, int& i0, int& i1, double& f) {
    if (o % 2 == 0) {
        i0 = o / 2 - 1;
        f = 0.75;
    } else {
        i0 = o / 2;
        f = 0.25;
    }
    i1 = i0 + 1;
    if (i0 < 0) i0 = 0;
    if (i1 > n - 1) i1 = n - 1;
}

}  // namespace detail

// x2 bilinear upsampling; offsets between alignment levels go through this
// (with a separate value doubling).
template <class T>
Var<T> upsample2(const Var<T>& x) {
    Shape4 s = x->val.shape;
    int ho = s.h * 2, wo = s.w * 2;
    auto out = make_var(Tensor4<T>(s.b, s.c, ho, wo), x->requires_grad);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            const T* src = x->val.plane(b, c);
            T* dst = out->val.plane(b, c);
            for (int y = 0; y < ho; ++y) {
                int y0, y1;
                double fy;
                detail::up2_taps(y, s.h, y0, y1, fy);
                for (int xw = 0; xw < wo; ++xw) {
                    int x0, x1;
                    double fx;
                    detail::up2_taps(xw, s.w, x0, x1, fx);
                    double v00 = src[std::size_t(y0) * s.w + x0], v01 = src[std::size_t(y0) * s.w + x1];
                    double v10 = src[std::size_t(y1) * s.w + x0], v11 = src[std::size_t(y1) * s.w + x1];
                    dst[std::size_t(y) * wo + xw] =
                        T((1 - fy) * ((1 - fx) * v00 + fx * v01) + fy * ((1 - fx) * v10 + fx * v11));
                }
            }
        }
    out->parents = {x};
    out->backward_fn = [x, s, ho, wo](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int b = 0; b < s.b; ++b)
            for (int c = 0; c < s.c; ++c) {
                T* dst = x->grad.plane(b, c);
                const T* src = n.grad.plane(b, c);
                for (int y = 0; y < ho; ++y) {
                    int y0, y1;
                    double fy;
                    detail::up2_taps(y, s.h, y0, y1, fy);
                    for (int xw = 0; xw < wo; ++xw) {
                        int x0, x1;
                        double fx;
                        detail::up2_taps(xw, s.w, x0, x1, fx);
                        T g = src[std::size_t(y) * wo + xw];
                        dst[std::size_t(y0) * s.w + x0] += T((1 - fy) * (1 - fx)) * g;
                        dst[std::size_t(y0) * s.w + x1] += T((1 - fy) * fx) * g;
                        dst[std::size_t(y1) * s.w + x0] += T(fy * (1 - fx)) * g;
                        dst[std::size_t(y1) * s.w + x1] += T(fy * fx) * g;
                    }
                }
            }
    };
    return out;
}

// --- reductions / broadcasts -------------------------------------------------

template <class T>
Var<T> spatial_mean(const Var<T>& x) {
    Shape4 s = x->val.shape;
    auto out = make_var(Tensor4<T>(s.b, s.c, 1, 1), x->requires_grad);
    double inv = 1.0 / (double(s.h) * s.w);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            const T* src = x->val.plane(b, c);
            double acc = 0;
            for (std::size_t i = 0; i < std::size_t(s.h) * s.w; ++i) acc += src[i];
            out->val.at(b, c, 0, 0) = T(acc * inv);
        }
    out->parents = {x};
    out->backward_fn = [x, s, inv](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int b = 0; b < s.b; ++b)
            for (int c = 0; c < s.c; ++c) {
                T g = T(double(n.grad.at(b, c, 0, 0)) * inv);
                T* dst = x->grad.plane(b, c);
                for (std::size_t i = 0; i < std::size_t(s.h) * s.w; ++i) dst[i] += g;
            }
    };
    return out;
}

// Broadcast (B,C,1,1) across a spatial extent; every position carries the
// identical C-vector.
template <class T>
Var<T> tile_hw(const Var<T>& x, int h, int w) {
    Shape4 s = x->val.shape;
    check(s.h == 1 && s.w == 1, "tile_hw: input must be (B,C,1,1), got " + s.str());
    auto out = make_var(Tensor4<T>(s.b, s.c, h, w), x->requires_grad);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            T vxy = x->val.at(b, c, 0, 0);
            T* dst = out->val.plane(b, c);
            std::fill(dst, dst + std::size_t(h) * w, vxy);
        }
    out->parents = {x};
    out->backward_fn = [x, s, h, w](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        for (int b = 0; b < s.b; ++b)
            for (int c = 0; c < s.c; ++c) {
                const T* src = n.grad.plane(b, c);
                double acc = 0;
                for (std::size_t i = 0; i < std::size_t(h) * w; ++i) acc += src[i];
                x->grad.at(b, c, 0, 0) += T(acc);
            }
    };
    return out;
}

template <class T>
Var<T> mean_all(const Var<T>& x) {
    auto out = make_var(Tensor4<T>(1, 1, 1, 1), x->requires_grad);
    double acc = 0;
    for (const T& v : x->val.v) acc += v;
    double inv = 1.0 / double(x->val.size());
    out->val.v[0] = T(acc * inv);
    out->parents = {x};
    out->backward_fn = [x, inv](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        T g = T(double(n.grad.v[0]) * inv);
        for (std::size_t i = 0; i < x->grad.v.size(); ++i) x->grad.v[i] += g;
    };
    return out;
}

// sum(x * r) with a constant projection tensor; collapses any operator
// output to a scalar for gradient checking.
template <class T>
Var<T> weighted_sum(const Var<T>& x, const Tensor4<T>& r) {
    check(x->val.same_shape(r), "weighted_sum: projection shape mismatch");
    auto out = make_var(Tensor4<T>(1, 1, 1, 1), x->requires_grad);
    double acc = 0;
    for (std::size_t i = 0; i < r.v.size(); ++i) acc += double(x->val.v[i]) * double(r.v[i]);
    out->val.v[0] = T(acc);
    out->parents = {x};
    out->backward_fn = [x, r](Node<T>& n) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        T g = n.grad.v[0];
        for (std::size_t i = 0; i < r.v.size(); ++i) x->grad.v[i] += g * r.v[i];
    };
    return out;
}

// --- losses -----------------------------------------------------------------

// mean(sqrt((pred-gt)^2 + eps^2)); the training objective.
template <class T>
Var<T> charbonnier_loss(const Var<T>& pred, const Tensor4<T>& gt, double eps) {
    check(pred->val.same_shape(gt), "charbonnier_loss: shape mismatch " +
                                        pred->val.shape.str() + " vs " + gt.shape.str());
    check(eps > 0, "charbonnier_loss: eps must be > 0");
    auto out = make_var(Tensor4<T>(1, 1, 1, 1), pred->requires_grad);
    double e2 = eps * eps;
    double acc = 0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        double d = double(pred->val.v[i]) - double(gt.v[i]);
        acc += std::sqrt(d * d + e2);
    }
    double inv = 1.0 / double(gt.v.size());
    out->val.v[0] = T(acc * inv);
    out->parents = {pred};
    out->backward_fn = [pred, gt, e2, inv](Node<T>& n) {
        if (!pred->requires_grad) return;
        pred->ensure_grad();
        double g = double(n.grad.v[0]) * inv;
        for (std::size_t i = 0; i < gt.v.size(); ++i) {
            double d = double(pred->val.v[i]) - double(gt.v[i]);
            pred->grad.v[i] += T(g * d / std::sqrt(d * d + e2));
        }
    };
    return out;
}

template <class T>
Var<T> mse_loss(const Var<T>& pred, const Tensor4<T>& gt) {
    check(pred->val.same_shape(gt), "mse_loss: shape mismatch");
    auto out = make_var(Tensor4<T>(1, 1, 1, 1), pred->requires_grad);
    double acc = 0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        double d = double(pred->val.v[i]) - double(gt.v[i]);
        acc += d * d;
    }
    double inv = 1.0 / double(gt.v.size());
    out->val.v[0] = T(acc * inv);
    out->parents = {pred};
    out->backward_fn = [pred, gt, inv](Node<T>& n) {
        if (!pred->requires_grad) return;
        pred->ensure_grad();
        double g = 2.0 * double(n.grad.v[0]) * inv;
        for (std::size_t i = 0; i < gt.v.size(); ++i)
            pred->grad.v[i] += T(g * (double(pred->val.v[i]) - double(gt.v[i])));
    };
    return out;
}

}  // namespace gavn
