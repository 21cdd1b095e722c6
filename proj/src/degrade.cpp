#include "gavn/degrade.hpp"

#include <algorithm>

namespace gavn {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Catmull-Rom weights for phase u in [0,1): taps at floor(x)-1 .. floor(x)+2.
void cubic_weights(double u, double w[4]) {
    const double a = -0.5;
    double u2 = u * u, u3 = u2 * u;
    w[0] = a * (u3 - 2 * u2 + u);
    w[1] = (a + 2) * u3 - (a + 3) * u2 + 1;
    w[2] = -(a + 2) * u3 + (2 * a + 3) * u2 - a * u;
    w[3] = a * (u2 - u3);
}

// Resamples one axis of every (b,c) plane; axis 0 = vertical.
Tensor4<float> resample_axis(const Tensor4<float>& x, int out_n, int axis) {
    Shape4 s = x.shape;
    int in_n = axis == 0 ? s.h : s.w;
    int other = axis == 0 ? s.w : s.h;
    Tensor4<float> out(s.b, s.c, axis == 0 ? out_n : s.h, axis == 0 ? s.w : out_n);
    double ratio = double(in_n) / double(out_n);

    std::vector<int> base(std::size_t(out_n), 0);
    std::vector<std::array<double, 4>> wts(std::size_t(out_n), std::array<double, 4>{});
    for (int o = 0; o < out_n; ++o) {
        double src = (o + 0.5) * ratio - 0.5;
        double fl = std::floor(src);
        base[std::size_t(o)] = int(fl);
        cubic_weights(src - fl, wts[std::size_t(o)].data());
    }

    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            const float* src = x.plane(b, c);
            float* dst = out.plane(b, c);
            for (int o = 0; o < out_n; ++o) {
                int i0 = base[std::size_t(o)];
                const auto& w = wts[std::size_t(o)];
                for (int j = 0; j < other; ++j) {
                    double acc = 0;
                    for (int tap = 0; tap < 4; ++tap) {
                        int i = reflect_index(i0 - 1 + tap, in_n);
                        acc += w[std::size_t(tap)] *
                               (axis == 0 ? src[std::size_t(i) * s.w + j] : src[std::size_t(j) * s.w + i]);
                    }
                    if (axis == 0)
                        dst[std::size_t(o) * s.w + j] = float(acc);
                    else
                        dst[std::size_t(j) * out_n + o] = float(acc);
                }
            }
        }
    return out;
}

// Orthonormal 8x8 DCT-II basis.
struct DctBasis {
    double m[8][8];
    DctBasis() {
        for (int u = 0; u < 8; ++u) {
            double alpha = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
            for (int x = 0; x < 8; ++x) m[u][x] = alpha * std::cos((2 * x + 1) * u * kPi / 16.0);
        }
    }
};

}  // namespace

std::vector<double> gaussian_kernel(int kernel_size) {
    check(kernel_size >= 1 && kernel_size % 2 == 1, "gaussian_kernel: kernel size must be odd");
    double sigma = gaussian_sigma_for_kernel(kernel_size);
    std::vector<double> k(std::size_t(kernel_size), 0.0);
    int c = kernel_size / 2;
    double sum = 0;
    for (int i = 0; i < kernel_size; ++i) {
        double d = i - c;
        k[std::size_t(i)] = std::exp(-d * d / (2 * sigma * sigma));
        sum += k[std::size_t(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

Tensor4<float> gaussian_blur(const Tensor4<float>& frames, int kernel_size) {
    check(kernel_size % 2 == 1, "gaussian_blur: kernel size must be odd, got " +
                                    std::to_string(kernel_size));
    std::vector<double> k = gaussian_kernel(kernel_size);
    int r = kernel_size / 2;
    Shape4 s = frames.shape;

    Tensor4<float> tmp(s), out(s);
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            const float* src = frames.plane(b, c);
            float* mid = tmp.plane(b, c);
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    double acc = 0;
                    for (int t = -r; t <= r; ++t)
                        acc += k[std::size_t(t + r)] * src[std::size_t(reflect_index(y + t, s.h)) * s.w + x];
                    mid[std::size_t(y) * s.w + x] = float(acc);
                }
            float* dst = out.plane(b, c);
            for (int y = 0; y < s.h; ++y)
                for (int x = 0; x < s.w; ++x) {
                    double acc = 0;
                    for (int t = -r; t <= r; ++t)
                        acc += k[std::size_t(t + r)] * mid[std::size_t(y) * s.w + reflect_index(x + t, s.w)];
                    dst[std::size_t(y) * s.w + x] = float(acc);
                }
        }
    return out;
}

Tensor4<float> resize_bicubic(const Tensor4<float>& frames, int out_h, int out_w) {
    check(out_h >= 1 && out_w >= 1, "resize_bicubic: bad output size");
    return resample_axis(resample_axis(frames, out_h, 0), out_w, 1);
}

Tensor4<float> bicubic_resize(const Tensor4<float>& frames, double scale) {
    check(scale > 0, "bicubic_resize: scale must be > 0");
    int out_h = int(std::lround(frames.shape.h / scale));
    int out_w = int(std::lround(frames.shape.w / scale));
    check(out_h >= 8 && out_w >= 8,
          "bicubic_resize: output would be smaller than 8x8 (" + std::to_string(out_h) + "x" +
              std::to_string(out_w) + ")");
    return resize_bicubic(frames, out_h, out_w);
}

Tensor4<float> compress_proxy(const Tensor4<float>& frames, double quality_step) {
    check(quality_step > 0, "compress_proxy: quality step must be > 0");
    static const DctBasis dct;
    Shape4 s = frames.shape;
    int hp = (s.h + 7) / 8 * 8, wp = (s.w + 7) / 8 * 8;
    Tensor4<float> padded = frames;
    if (hp != s.h || wp != s.w) {
        padded = Tensor4<float>(s.b, s.c, hp, wp);
        for (int b = 0; b < s.b; ++b)
            for (int c = 0; c < s.c; ++c) {
                const float* src = frames.plane(b, c);
                float* dst = padded.plane(b, c);
                for (int y = 0; y < hp; ++y)
                    for (int x = 0; x < wp; ++x)
                        dst[std::size_t(y) * wp + x] =
                            src[std::size_t(reflect_index(y, s.h)) * s.w + reflect_index(x, s.w)];
            }
    }

    Tensor4<float> out(s);
    double blk[8][8], coef[8][8];
    for (int b = 0; b < s.b; ++b)
        for (int c = 0; c < s.c; ++c) {
            const float* src = padded.plane(b, c);
            float* dst = out.plane(b, c);
            for (int by = 0; by < hp; by += 8)
                for (int bx = 0; bx < wp; bx += 8) {
                    for (int y = 0; y < 8; ++y)
                        for (int x = 0; x < 8; ++x) blk[y][x] = src[std::size_t(by + y) * wp + bx + x];
                    // C = M B M^T, quantize, B' = M^T C M
                    for (int u = 0; u < 8; ++u)
                        for (int v = 0; v < 8; ++v) {
                            double acc = 0;
                            for (int y = 0; y < 8; ++y)
                                for (int x = 0; x < 8; ++x)
                                    acc += dct.m[u][y] * blk[y][x] * dct.m[v][x];
                            coef[u][v] = quality_step * std::round(acc / quality_step);
                        }
                    for (int y = 0; y < 8; ++y)
                        for (int x = 0; x < 8; ++x) {
                            double acc = 0;
                            for (int u = 0; u < 8; ++u)
                                for (int v = 0; v < 8; ++v)
                                    acc += dct.m[u][y] * coef[u][v] * dct.m[v][x];
                            if (by + y < s.h && bx + x < s.w)
                                dst[std::size_t(by + y) * s.w + bx + x] =
                                    float(std::clamp(acc, 0.0, 1.0));
                        }
                }
        }
    return out;
}

Clip degrade_clip(const Clip& clip, const DegradationSpec& spec) {
    spec.validate();
    Clip out = clip;
    if (spec.kind == "blur") {
        out.frames = gaussian_blur(clip.frames, int(spec.level));
    } else if (spec.kind == "compression") {
        out.frames = compress_proxy(clip.frames, spec.level);
    } else {
        Tensor4<float> small = bicubic_resize(clip.frames, spec.level);
        out.frames = resize_bicubic(small, clip.height(), clip.width());
    }
    for (auto& v : out.frames.v) v = std::clamp(v, 0.0f, 1.0f);
    out.degradation = DegradationInfo{spec.kind, spec.level, spec.seed};
    return out;
}

}  // namespace gavn
