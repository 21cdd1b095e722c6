#pragma once

#include "gavn/conv.hpp"

namespace gavn {

namespace detail {

// Bilinear taps at a continuous position, clamped to [0, n-1]. `moved`
// reports whether the raw coordinate was inside the valid range (coordinate
// gradients are zero where the clamp is active).
struct BilinTap {
    int i0, i1;
    double f;
    bool interior;
};

inline BilinTap bilin_tap(double p, int n) {
    BilinTap t;
    t.interior = p > 0.0 && p < double(n - 1);
    if (p < 0.0) p = 0.0;
    if (p > double(n - 1)) p = double(n - 1);
    t.i0 = int(std::floor(p));
    if (t.i0 > n - 1) t.i0 = n - 1;
    t.f = p - double(t.i0);
    t.i1 = t.i0 + 1 <= n - 1 ? t.i0 + 1 : n - 1;
    return t;
}

}  // namespace detail

// Samples feat at continuous pixel coordinates. coords is (B, 2, H', W')
// with channel 0 = x and channel 1 = y; out-of-range positions clamp to the
// border. Differentiable w.r.t. both feat and coords.
template <class T>
Var<T> bilinear_sample(const Var<T>& feat, const Var<T>& coords) {
    Shape4 fs = feat->val.shape, cs = coords->val.shape;
    check(cs.c == 2, "bilinear_sample: coords must have 2 channels (x, y), got " + cs.str());
    check(cs.b == fs.b, "bilinear_sample: batch mismatch " + fs.str() + " vs " + cs.str());
    bool rg = feat->requires_grad || coords->requires_grad;
    auto out = make_var(Tensor4<T>(fs.b, fs.c, cs.h, cs.w), rg);
    for (int b = 0; b < fs.b; ++b)
        for (int oy = 0; oy < cs.h; ++oy)
            for (int ox = 0; ox < cs.w; ++ox) {
                auto tx = detail::bilin_tap(double(coords->val.at(b, 0, oy, ox)), fs.w);
                auto ty = detail::bilin_tap(double(coords->val.at(b, 1, oy, ox)), fs.h);
                for (int c = 0; c < fs.c; ++c) {
                    const T* p = feat->val.plane(b, c);
                    double v00 = p[std::size_t(ty.i0) * fs.w + tx.i0];
                    double v01 = p[std::size_t(ty.i0) * fs.w + tx.i1];
                    double v10 = p[std::size_t(ty.i1) * fs.w + tx.i0];
                    double v11 = p[std::size_t(ty.i1) * fs.w + tx.i1];
                    out->val.at(b, c, oy, ox) =
                        T((1 - ty.f) * ((1 - tx.f) * v00 + tx.f * v01) +
                          ty.f * ((1 - tx.f) * v10 + tx.f * v11));
                }
            }
    out->parents = {feat, coords};
    out->backward_fn = [feat, coords, fs, cs](Node<T>& n) {
        if (feat->requires_grad) feat->ensure_grad();
        if (coords->requires_grad) coords->ensure_grad();
        for (int b = 0; b < fs.b; ++b)
            for (int oy = 0; oy < cs.h; ++oy)
                for (int ox = 0; ox < cs.w; ++ox) {
                    auto tx = detail::bilin_tap(double(coords->val.at(b, 0, oy, ox)), fs.w);
                    auto ty = detail::bilin_tap(double(coords->val.at(b, 1, oy, ox)), fs.h);
                    double dpx = 0, dpy = 0;
                    for (int c = 0; c < fs.c; ++c) {
                        double g = n.grad.at(b, c, oy, ox);
                        const T* p = feat->val.plane(b, c);
                        double v00 = p[std::size_t(ty.i0) * fs.w + tx.i0];
                        double v01 = p[std::size_t(ty.i0) * fs.w + tx.i1];
                        double v10 = p[std::size_t(ty.i1) * fs.w + tx.i0];
                        double v11 = p[std::size_t(ty.i1) * fs.w + tx.i1];
                        if (feat->requires_grad) {
                            T* fg = feat->grad.plane(b, c);
                            fg[std::size_t(ty.i0) * fs.w + tx.i0] += T(g * (1 - ty.f) * (1 - tx.f));
                            fg[std::size_t(ty.i0) * fs.w + tx.i1] += T(g * (1 - ty.f) * tx.f);
                            fg[std::size_t(ty.i1) * fs.w + tx.i0] += T(g * ty.f * (1 - tx.f));
                            fg[std::size_t(ty.i1) * fs.w + tx.i1] += T(g * ty.f * tx.f);
                        }
                        dpx += g * ((1 - ty.f) * (v01 - v00) + ty.f * (v11 - v10));
                        dpy += g * ((1 - tx.f) * (v10 - v00) + tx.f * (v11 - v01));
                    }
                    if (coords->requires_grad) {
                        if (tx.interior) coords->grad.at(b, 0, oy, ox) += T(dpx);
                        if (ty.interior) coords->grad.at(b, 1, oy, ox) += T(dpy);
                    }
                }
    };
    return out;
}

// Deformable 3x3-style convolution, stride 1, output spatial size equal to
// the input. offsets is (B, 2*k*k, H, W): channels (2*tap, 2*tap+1) hold the
// (dx, dy) displacement of tap = ky*k+kx. The input is reflect-padded by k/2
// before sampling, so zero offsets reproduce conv2d (reflect) exactly; the
// padded border also gives clamped samples a margin before saturating.
template <class T>
Var<T> deform_conv2d(const Var<T>& x, const Var<T>& offsets, const Var<T>& w) {
    Shape4 xs = x->val.shape, os = offsets->val.shape, ws = w->val.shape;
    int k = ws.h;
    check(ws.h == ws.w && k % 2 == 1, "deform_conv2d: kernel must be odd square, got " + ws.str());
    check(ws.c == xs.c, "deform_conv2d: input channels " + std::to_string(xs.c) +
                            " != weight in_ch " + std::to_string(ws.c));
    int taps = k * k;
    check(os.c == 2 * taps, "deform_conv2d: offsets need " + std::to_string(2 * taps) +
                                " channels, got " + std::to_string(os.c));
    check(os.b == xs.b && os.h == xs.h && os.w == xs.w,
          "deform_conv2d: offsets spatial size must match input, got " + os.str());

    int pad = k / 2;
    auto xp = std::make_shared<Tensor4<T>>(reflect_pad(x->val, pad, pad));
    int Hp = xp->shape.h, Wp = xp->shape.w;

    // Sampled taps, laid out as channels so the weight application is a 1x1
    // convolution over (B, C*taps, H, W).
    auto sampled = std::make_shared<Tensor4<T>>(xs.b, xs.c * taps, xs.h, xs.w);
    for (int b = 0; b < xs.b; ++b)
        for (int tap = 0; tap < taps; ++tap) {
            int ky = tap / k, kx = tap % k;
            for (int oy = 0; oy < xs.h; ++oy)
                for (int ox = 0; ox < xs.w; ++ox) {
                    double px = double(ox + kx) + double(offsets->val.at(b, 2 * tap, oy, ox));
                    double py = double(oy + ky) + double(offsets->val.at(b, 2 * tap + 1, oy, ox));
                    auto tx = detail::bilin_tap(px, Wp);
                    auto ty = detail::bilin_tap(py, Hp);
                    for (int ci = 0; ci < xs.c; ++ci) {
                        const T* p = xp->plane(b, ci);
                        double v00 = p[std::size_t(ty.i0) * Wp + tx.i0];
                        double v01 = p[std::size_t(ty.i0) * Wp + tx.i1];
                        double v10 = p[std::size_t(ty.i1) * Wp + tx.i0];
                        double v11 = p[std::size_t(ty.i1) * Wp + tx.i1];
                        sampled->at(b, ci * taps + tap, oy, ox) =
                            T((1 - ty.f) * ((1 - tx.f) * v00 + tx.f * v01) +
                              ty.f * ((1 - tx.f) * v10 + tx.f * v11));
                    }
                }
        }

    Tensor4<T> w1x1(ws.b, ws.c * taps, 1, 1);
    for (int o = 0; o < ws.b; ++o)
        for (int ci = 0; ci < ws.c; ++ci)
            for (int tap = 0; tap < taps; ++tap)
                w1x1.at(o, ci * taps + tap, 0, 0) = w->val.at(o, ci, tap / k, tap % k);

    bool rg = x->requires_grad || offsets->requires_grad || w->requires_grad;
    auto out = make_var(
        detail::conv_core_fwd(*sampled, w1x1, static_cast<const Tensor4<T>*>(nullptr), 1, 1), rg);
    out->parents = {x, offsets, w};
    out->backward_fn = [x, offsets, w, xp, sampled, xs, ws, k, taps, Hp, Wp](Node<T>& n) {
        Tensor4<T> w1(ws.b, ws.c * taps, 1, 1);
        for (int o = 0; o < ws.b; ++o)
            for (int ci = 0; ci < ws.c; ++ci)
                for (int tap = 0; tap < taps; ++tap)
                    w1.at(o, ci * taps + tap, 0, 0) = w->val.at(o, ci, tap / k, tap % k);

        if (w->requires_grad) {
            Tensor4<T> dw1(ws.b, ws.c * taps, 1, 1);
            detail::conv_core_bwd_w(*sampled, n.grad, dw1, 1, 1);
            w->ensure_grad();
            for (int o = 0; o < ws.b; ++o)
                for (int ci = 0; ci < ws.c; ++ci)
                    for (int tap = 0; tap < taps; ++tap)
                        w->grad.at(o, ci, tap / k, tap % k) += dw1.at(o, ci * taps + tap, 0, 0);
        }

        bool need_x = x->requires_grad, need_off = offsets->requires_grad;
        if (!need_x && !need_off) return;
        Tensor4<T> ds(sampled->shape);
        detail::conv_core_bwd_x(w1, n.grad, ds, 1, 1);

        Tensor4<T> dxp;
        if (need_x) dxp = Tensor4<T>(xp->shape);
        if (need_off) offsets->ensure_grad();
        for (int b = 0; b < xs.b; ++b)
            for (int tap = 0; tap < taps; ++tap) {
                int ky = tap / k, kx = tap % k;
                for (int oy = 0; oy < xs.h; ++oy)
                    for (int ox = 0; ox < xs.w; ++ox) {
                        double px = double(ox + kx) + double(offsets->val.at(b, 2 * tap, oy, ox));
                        double py = double(oy + ky) + double(offsets->val.at(b, 2 * tap + 1, oy, ox));
                        auto tx = detail::bilin_tap(px, Wp);
                        auto ty = detail::bilin_tap(py, Hp);
                        double dpx = 0, dpy = 0;
                        for (int ci = 0; ci < xs.c; ++ci) {
                            double g = ds.at(b, ci * taps + tap, oy, ox);
                            const T* p = xp->plane(b, ci);
                            double v00 = p[std::size_t(ty.i0) * Wp + tx.i0];
                            double v01 = p[std::size_t(ty.i0) * Wp + tx.i1];
                            double v10 = p[std::size_t(ty.i1) * Wp + tx.i0];
                            double v11 = p[std::size_t(ty.i1) * Wp + tx.i1];
                            if (need_x) {
                                T* fg = dxp.plane(b, ci);
                                fg[std::size_t(ty.i0) * Wp + tx.i0] += T(g * (1 - ty.f) * (1 - tx.f));
                                fg[std::size_t(ty.i0) * Wp + tx.i1] += T(g * (1 - ty.f) * tx.f);
                                fg[std::size_t(ty.i1) * Wp + tx.i0] += T(g * ty.f * (1 - tx.f));
                                fg[std::size_t(ty.i1) * Wp + tx.i1] += T(g * ty.f * tx.f);
                            }
                            dpx += g * ((1 - ty.f) * (v01 - v00) + ty.f * (v11 - v10));
                            dpy += g * ((1 - tx.f) * (v10 - v00) + tx.f * (v11 - v01));
                        }
                        if (need_off) {
                            if (tx.interior) offsets->grad.at(b, 2 * tap, oy, ox) += T(dpx);
                            if (ty.interior) offsets->grad.at(b, 2 * tap + 1, oy, ox) += T(dpy);
                        }
                    }
            }
        if (need_x) {
            x->ensure_grad();
            fold_reflect_pad(dxp, x->grad, k / 2, k / 2);
        }
    };
    return out;
}

}  // namespace gavn
