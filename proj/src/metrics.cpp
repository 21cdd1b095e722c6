#include "gavn/metrics.hpp"

#include <algorithm>

#include <json.hpp>

namespace gavn {

namespace {

const double kMsWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

struct Gray {
    int h, w;
    std::vector<double> v;
};

Gray to_gray(const Tensor4<float>& x) {
    Shape4 s = x.shape;
    Gray g{s.h, s.w, std::vector<double>(std::size_t(s.h) * s.w, 0.0)};
    for (int c = 0; c < s.c; ++c) {
        const float* p = x.plane(0, c);
        for (std::size_t i = 0; i < g.v.size(); ++i) g.v[i] += p[i];
    }
    for (auto& v : g.v) v /= s.c;
    return g;
}

Gray downsample2(const Gray& g) {
    Gray out{g.h / 2, g.w / 2, {}};
    out.v.resize(std::size_t(out.h) * out.w);
    for (int y = 0; y < out.h; ++y)
        for (int x = 0; x < out.w; ++x)
            out.v[std::size_t(y) * out.w + x] =
                0.25 * (g.v[std::size_t(2 * y) * g.w + 2 * x] + g.v[std::size_t(2 * y) * g.w + 2 * x + 1] +
                        g.v[std::size_t(2 * y + 1) * g.w + 2 * x] +
                        g.v[std::size_t(2 * y + 1) * g.w + 2 * x + 1]);
    return out;
}

std::vector<double> ssim_window_taps() {
    std::vector<double> k(11);
    double sum = 0;
    for (int i = 0; i < 11; ++i) {
        double d = i - 5;
        k[std::size_t(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += k[std::size_t(i)];
    }
    for (auto& v : k) v /= sum;
    return k;
}

// separable Gaussian filter, valid region only
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w, int& oh, int& ow) {
    static const std::vector<double> k = ssim_window_taps();
    oh = h - 10;
    ow = w - 10;
    std::vector<double> mid(std::size_t(oh) * w, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int t = 0; t < 11; ++t) acc += k[std::size_t(t)] * img[std::size_t(y + t) * w + x];
            mid[std::size_t(y) * w + x] = acc;
        }
    std::vector<double> out(std::size_t(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0;
            for (int t = 0; t < 11; ++t) acc += k[std::size_t(t)] * mid[std::size_t(y) * w + x + t];
            out[std::size_t(y) * ow + x] = acc;
        }
    return out;
}

// mean luminance-contrast-structure terms over the valid map
void ssim_terms(const Gray& a, const Gray& b, double& mean_ssim, double& mean_cs) {
    check(a.h >= 11 && a.w >= 11, "ssim: image smaller than the 11x11 window");
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    std::vector<double> aa(a.v.size()), bb(a.v.size()), ab(a.v.size());
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        aa[i] = a.v[i] * a.v[i];
        bb[i] = b.v[i] * b.v[i];
        ab[i] = a.v[i] * b.v[i];
    }
    int oh, ow;
    std::vector<double> mu_a = filter_valid(a.v, a.h, a.w, oh, ow);
    std::vector<double> mu_b = filter_valid(b.v, a.h, a.w, oh, ow);
    std::vector<double> m_aa = filter_valid(aa, a.h, a.w, oh, ow);
    std::vector<double> m_bb = filter_valid(bb, a.h, a.w, oh, ow);
    std::vector<double> m_ab = filter_valid(ab, a.h, a.w, oh, ow);
    double acc_ssim = 0, acc_cs = 0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        double va = m_aa[i] - mu_a[i] * mu_a[i];
        double vb = m_bb[i] - mu_b[i] * mu_b[i];
        double cov = m_ab[i] - mu_a[i] * mu_b[i];
        double lum = (2 * mu_a[i] * mu_b[i] + c1) / (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1);
        double cs = (2 * cov + c2) / (va + vb + c2);
        acc_ssim += lum * cs;
        acc_cs += cs;
    }
    mean_ssim = acc_ssim / double(mu_a.size());
    mean_cs = acc_cs / double(mu_a.size());
}

Tensor4<float> frame_view(const Tensor4<float>& clip_frames, int t) {
    Shape4 s = clip_frames.shape;
    Tensor4<float> f(1, s.c, s.h, s.w);
    std::copy(clip_frames.plane(t, 0), clip_frames.plane(t, 0) + f.v.size(), f.v.begin());
    return f;
}

}  // namespace

double psnr(const Tensor4<float>& a, const Tensor4<float>& b, double data_range) {
    check(a.shape == b.shape, "psnr: shape mismatch " + a.shape.str() + " vs " + b.shape.str());
    double mse = 0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        double d = double(a.v[i]) - double(b.v[i]);
        mse += d * d;
    }
    mse /= double(a.v.size());
    if (mse == 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

double ssim(const Tensor4<float>& a, const Tensor4<float>& b) {
    check(a.shape == b.shape, "ssim: shape mismatch");
    check(a.shape.b == 1, "ssim: pass a single frame");
    double s, cs;
    ssim_terms(to_gray(a), to_gray(b), s, cs);
    return s;
}

double ms_ssim(const Tensor4<float>& a, const Tensor4<float>& b, int levels) {
    check(a.shape == b.shape, "ms_ssim: shape mismatch");
    check(a.shape.b == 1, "ms_ssim: pass a single frame");
    check(levels >= 1 && levels <= 5, "ms_ssim: levels must be in [1,5]");

    // reduce level count until the coarsest scale still fits the window
    int usable = 1;
    for (int l = 2; l <= levels; ++l) {
        int hh = a.shape.h >> (l - 1), ww = a.shape.w >> (l - 1);
        if (hh >= 11 && ww >= 11) usable = l;
    }
    double wsum = 0;
    for (int l = 0; l < usable; ++l) wsum += kMsWeights[l];

    Gray ga = to_gray(a), gb = to_gray(b);
    double result = 1.0;
    for (int l = 0; l < usable; ++l) {
        double s, cs;
        ssim_terms(ga, gb, s, cs);
        double weight = kMsWeights[l] / wsum;
        double term = (l == usable - 1) ? s : cs;
        result *= std::pow(std::max(term, 0.0), weight);
        if (l + 1 < usable) {
            ga = downsample2(ga);
            gb = downsample2(gb);
        }
    }
    return result;
}

std::array<int, 4> region_box(const std::vector<double>& landmarks_kx2, const std::string& region,
                              int h, int w, int dilate) {
    check(landmarks_kx2.size() >= 16, "region_box: need at least 8 landmarks");
    std::vector<int> ids;
    if (region == "mouth") {
        ids = {kMouthCornerL, kMouthCornerR, kMouthTop, kMouthBottom};
    } else if (region == "eyes") {
        ids = {kEyeL, kEyeR};
    } else {
        check(false, "region_box: unknown region '" + region + "'");
    }
    double x0 = 1e30, x1 = -1e30, y0 = 1e30, y1 = -1e30;
    for (int k : ids) {
        x0 = std::min(x0, landmarks_kx2[std::size_t(k) * 2]);
        x1 = std::max(x1, landmarks_kx2[std::size_t(k) * 2]);
        y0 = std::min(y0, landmarks_kx2[std::size_t(k) * 2 + 1]);
        y1 = std::max(y1, landmarks_kx2[std::size_t(k) * 2 + 1]);
    }
    int bx0 = std::max(0, int(std::floor(x0)) - dilate);
    int bx1 = std::min(w, int(std::ceil(x1)) + dilate + 1);
    int by0 = std::max(0, int(std::floor(y0)) - dilate);
    int by1 = std::min(h, int(std::ceil(y1)) + dilate + 1);
    check(bx1 - bx0 >= 4 && by1 - by0 >= 4, "region_box: degenerate region box");
    return {bx0, bx1, by0, by1};
}

double region_psnr(const Tensor4<float>& a, const Tensor4<float>& b,
                   const std::vector<double>& landmarks_kx2, const std::string& region,
                   double data_range) {
    check(a.shape == b.shape, "region_psnr: shape mismatch");
    auto [x0, x1, y0, y1] = region_box(landmarks_kx2, region, a.shape.h, a.shape.w);
    double mse = 0;
    std::int64_t count = 0;
    for (int bb = 0; bb < a.shape.b; ++bb)
        for (int c = 0; c < a.shape.c; ++c) {
            const float* pa = a.plane(bb, c);
            const float* pb = b.plane(bb, c);
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    double d = double(pa[std::size_t(y) * a.shape.w + x]) -
                               double(pb[std::size_t(y) * a.shape.w + x]);
                    mse += d * d;
                    ++count;
                }
        }
    mse /= double(count);
    if (mse == 0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(data_range * data_range / mse));
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["config"] = {{"data_range", data_range}, {"ssim_window", ssim_window}, {"ms_levels", ms_levels}};
    for (const auto& [name, vals] : per_frame) j["per_frame"][name] = vals;
    for (const auto& [name, val] : means) j["mean"][name] = val;
    return j.dump(2);
}

MetricReport evaluate_clip(const Clip& reference, const Clip& restored) {
    check(reference.frame_count() == restored.frame_count(),
          "evaluate_clip: frame count mismatch (" + std::to_string(reference.frame_count()) +
              " vs " + std::to_string(restored.frame_count()) + ")");
    check(reference.frames.shape == restored.frames.shape, "evaluate_clip: frame shape mismatch");

    MetricReport rep;
    int T = reference.frame_count();
    int K = reference.landmark_count;
    for (int t = 0; t < T; ++t) {
        Tensor4<float> fa = frame_view(reference.frames, t);
        Tensor4<float> fb = frame_view(restored.frames, t);
        std::vector<double> lms(reference.landmarks.begin() + std::size_t(t) * K * 2,
                                reference.landmarks.begin() + std::size_t(t + 1) * K * 2);
        rep.per_frame["psnr"].push_back(psnr(fa, fb));
        rep.per_frame["ssim"].push_back(ssim(fa, fb));
        rep.per_frame["ms_ssim"].push_back(ms_ssim(fa, fb));
        rep.per_frame["mouth_psnr"].push_back(region_psnr(fa, fb, lms, "mouth"));
        rep.per_frame["eyes_psnr"].push_back(region_psnr(fa, fb, lms, "eyes"));
    }
    for (const auto& [name, vals] : rep.per_frame) {
        double acc = 0;
        for (double v : vals) acc += v;
        rep.means[name] = acc / double(vals.size());
    }
    return rep;
}

}  // namespace gavn
