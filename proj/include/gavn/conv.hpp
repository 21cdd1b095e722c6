#pragma once

#include "gavn/ops.hpp"

namespace gavn {

template <class T>
Tensor4<T> reflect_pad(const Tensor4<T>& x, int ph, int pw) {
    if (ph == 0 && pw == 0) return x;
    Shape4 s = x.shape;
    Tensor4<T> out(s.b, s.c, s.h + 2 * ph, s.w + 2 * pw);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            const T* src = x.plane(b, c);
            T* dst = out.plane(b, c);
            for (int y = 0; y < s.h + 2 * ph; ++y) {
                int sy = reflect_index(y - ph, s.h);
                for (int xw = 0; xw < s.w + 2 * pw; ++xw)
                    dst[std::size_t(y) * (s.w + 2 * pw) + xw] =
                        src[std::size_t(sy) * s.w + reflect_index(xw - pw, s.w)];
            }
        }
    return out;
}

// Accumulates a padded-space gradient back onto the unpadded tensor,
// summing reflected border contributions.
template <class T>
void fold_reflect_pad(const Tensor4<T>& dxp, Tensor4<T>& dx, int ph, int pw) {
    Shape4 s = dx.shape;
    if (ph == 0 && pw == 0) {
        for (std::size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dxp.v[i];
        return;
    }
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            const T* src = dxp.plane(b, c);
            T* dst = dx.plane(b, c);
            for (int y = 0; y < s.h + 2 * ph; ++y) {
                int sy = reflect_index(y - ph, s.h);
                for (int xw = 0; xw < s.w + 2 * pw; ++xw)
                    dst[std::size_t(sy) * s.w + reflect_index(xw - pw, s.w)] +=
                        src[std::size_t(y) * (s.w + 2 * pw) + xw];
            }
        }
}

namespace detail {

// Valid cross-correlation on an already-padded input. Weight layout is
// (out_ch, in_ch, kh, kw); bias may be null.
template <class T>
Tensor4<T> conv_core_fwd(const Tensor4<T>& xp, const Tensor4<T>& w, const Tensor4<T>* bias,
                         int sh, int sw) {
    int B = xp.shape.b, C = xp.shape.c, Hp = xp.shape.h, Wp = xp.shape.w;
    int O = w.shape.b, kh = w.shape.h, kw = w.shape.w;
    int Ho = (Hp - kh) / sh + 1, Wo = (Wp - kw) / sw + 1;
    Tensor4<T> out(B, O, Ho, Wo);
    parallel_for(std::int64_t(B) * O, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t t = lo; t < hi; ++t) {
            int b = int(t / O), o = int(t % O);
            T* dst = out.plane(b, o);
            T bv = bias ? bias->v[std::size_t(o)] : T(0);
            std::fill(dst, dst + std::size_t(Ho) * Wo, bv);
            for (int ci = 0; ci < C; ++ci) {
                const T* src = xp.plane(b, ci);
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        T wv = w.at(o, ci, ky, kx);
                        for (int oy = 0; oy < Ho; ++oy) {
                            const T* row = src + std::size_t(oy * sh + ky) * Wp + kx;
                            T* orow = dst + std::size_t(oy) * Wo;
                            if (sw == 1) {
                                for (int ox = 0; ox < Wo; ++ox) orow[ox] += wv * row[ox];
                            } else {
                                for (int ox = 0; ox < Wo; ++ox) orow[ox] += wv * row[std::size_t(ox) * sw];
                            }
                        }
                    }
            }
        }
    });
    return out;
}

template <class T>
void conv_core_bwd_w(const Tensor4<T>& xp, const Tensor4<T>& dy, Tensor4<T>& dw, int sh, int sw) {
    int B = xp.shape.b, C = xp.shape.c, Wp = xp.shape.w;
    int O = dw.shape.b, kh = dw.shape.h, kw = dw.shape.w;
    int Ho = dy.shape.h, Wo = dy.shape.w;
    parallel_for(O, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t o = lo; o < hi; ++o)
            for (int ci = 0; ci < C; ++ci)
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        double acc = 0;
                        for (int b = 0; b < B; ++b) {
                            const T* src = xp.plane(b, ci);
                            const T* g = dy.plane(b, int(o));
                            for (int oy = 0; oy < Ho; ++oy) {
                                const T* row = src + std::size_t(oy * sh + ky) * Wp + kx;
                                const T* grow = g + std::size_t(oy) * Wo;
                                if (sw == 1) {
                                    for (int ox = 0; ox < Wo; ++ox) acc += double(grow[ox]) * double(row[ox]);
                                } else {
                                    for (int ox = 0; ox < Wo; ++ox)
                                        acc += double(grow[ox]) * double(row[std::size_t(ox) * sw]);
                                }
                            }
                        }
                        dw.at(int(o), ci, ky, kx) += T(acc);
                    }
    });
}

template <class T>
void conv_core_bwd_x(const Tensor4<T>& w, const Tensor4<T>& dy, Tensor4<T>& dxp, int sh, int sw) {
    int B = dxp.shape.b, C = dxp.shape.c, Wp = dxp.shape.w;
    int O = w.shape.b, kh = w.shape.h, kw = w.shape.w;
    int Ho = dy.shape.h, Wo = dy.shape.w;
    parallel_for(std::int64_t(B) * C, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t t = lo; t < hi; ++t) {
            int b = int(t / C), ci = int(t % C);
            T* dst = dxp.plane(b, ci);
            for (int o = 0; o < O; ++o) {
                const T* g = dy.plane(b, o);
                for (int ky = 0; ky < kh; ++ky)
                    for (int kx = 0; kx < kw; ++kx) {
                        T wv = w.at(o, ci, ky, kx);
                        for (int oy = 0; oy < Ho; ++oy) {
                            T* row = dst + std::size_t(oy * sh + ky) * Wp + kx;
                            const T* grow = g + std::size_t(oy) * Wo;
                            if (sw == 1) {
                                for (int ox = 0; ox < Wo; ++ox) row[ox] += wv * grow[ox];
                            } else {
                                for (int ox = 0; ox < Wo; ++ox) row[std::size_t(ox) * sw] += wv * grow[ox];
                            }
                        }
                    }
            }
        }
    });
}

template <class T>
Var<T> conv_common(const Var<T>& x, const Var<T>& w, const Var<T>& b, int sh, int sw, int ph,
                   int pw, const char* who) {
    Shape4 xs = x->val.shape, ws = w->val.shape;
    check(xs.c == ws.c, std::string(who) + ": input channels " + std::to_string(xs.c) +
                            " != weight in_ch " + std::to_string(ws.c) + " (weight " + ws.str() + ")");
    check(xs.h + 2 * ph >= ws.h && xs.w + 2 * pw >= ws.w,
          std::string(who) + ": kernel larger than padded input");
    if (b) {
        check(b->val.shape == Shape4{1, ws.b, 1, 1},
              std::string(who) + ": bias must be (1," + std::to_string(ws.b) + ",1,1)");
    }
    auto xp = std::make_shared<Tensor4<T>>(reflect_pad(x->val, ph, pw));
    bool rg = x->requires_grad || w->requires_grad || (b && b->requires_grad);
    auto out = make_var(conv_core_fwd(*xp, w->val, b ? &b->val : nullptr, sh, sw), rg);
    out->parents = b ? std::vector<Var<T>>{x, w, b} : std::vector<Var<T>>{x, w};
    out->backward_fn = [x, w, b, xp, sh, sw, ph, pw](Node<T>& n) {
        if (w->requires_grad) {
            w->ensure_grad();
            conv_core_bwd_w(*xp, n.grad, w->grad, sh, sw);
        }
        if (b && b->requires_grad) {
            b->ensure_grad();
            int O = n.grad.shape.c;
            for (int bb = 0; bb < n.grad.shape.b; ++bb)
                for (int o = 0; o < O; ++o) {
                    const T* g = n.grad.plane(bb, o);
                    double acc = 0;
                    for (std::size_t i = 0; i < std::size_t(n.grad.shape.h) * n.grad.shape.w; ++i)
                        acc += g[i];
                    b->grad.v[std::size_t(o)] += T(acc);
                }
        }
        if (x->requires_grad) {
            x->ensure_grad();
            Tensor4<T> dxp(xp->shape);
            conv_core_bwd_x(w->val, n.grad, dxp, sh, sw);
            fold_reflect_pad(dxp, x->grad, ph, pw);
        }
    };
    return out;
}

}  // namespace detail

// 2-D convolution with odd square kernels and reflect padding. Output
// spatial size is floor((H + 2*pad - k)/stride) + 1.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
    Shape4 ws = w->val.shape;
    check(ws.h == ws.w && ws.h % 2 == 1, "conv2d: kernel must be odd square, got " + ws.str());
    check(stride >= 1 && pad >= 0, "conv2d: bad stride/padding");
    return detail::conv_common(x, w, b, stride, stride, pad, pad, "conv2d");
}

// 1-D convolution over (B, C, 1, L) with reflect padding along L.
template <class T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int pad) {
    Shape4 xs = x->val.shape, ws = w->val.shape;
    check(xs.h == 1 && ws.h == 1, "conv1d: expects (B,C,1,L) input and (O,C,1,k) weight");
    check(ws.w % 2 == 1, "conv1d: kernel length must be odd");
    check(stride >= 1 && pad >= 0, "conv1d: bad stride/padding");
    return detail::conv_common(x, w, b, 1, stride, 0, pad, "conv1d");
}

}  // namespace gavn
