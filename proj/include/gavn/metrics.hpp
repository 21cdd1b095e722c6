#pragma once

#include <map>

#include "gavn/clip.hpp"

namespace gavn {

// Zero-MSE pairs report the +inf sentinel capped at this many dB.
constexpr double kPsnrCap = 100.0;

// 10*log10(range^2 / MSE) over everything in the tensors.
double psnr(const Tensor4<float>& a, const Tensor4<float>& b, double data_range = 1.0);

// Mean local SSIM on channel-mean grayscale; 11x11 Gaussian window with
// sigma 1.5, C1 = (0.01 L)^2, C2 = (0.03 L)^2, L = 1, valid-region stats.
// Inputs are single frames (1-or-T batch is rejected; pass one frame).
double ssim(const Tensor4<float>& a, const Tensor4<float>& b);

// Multi-scale SSIM. When the image cannot support `levels` dyadic scales
// (needs >= 11 px at the coarsest), the level count is reduced and the
// standard weights are renormalized over the kept prefix.
double ms_ssim(const Tensor4<float>& a, const Tensor4<float>& b, int levels = 5);

// PSNR over the landmark-derived region bounding box dilated by 4 px.
// region is "mouth" (corners + top + bottom) or "eyes" (both centers).
double region_psnr(const Tensor4<float>& a, const Tensor4<float>& b,
                   const std::vector<double>& landmarks_kx2, const std::string& region,
                   double data_range = 1.0);

// Returns the clipped, dilated region box [x0,x1) x [y0,y1) used above.
std::array<int, 4> region_box(const std::vector<double>& landmarks_kx2, const std::string& region,
                              int h, int w, int dilate = 4);

struct MetricReport {
    std::map<std::string, std::vector<double>> per_frame;
    std::map<std::string, double> means;
    double data_range = 1.0;
    int ssim_window = 11;
    int ms_levels = 5;

    std::string to_json() const;
};

// Per-frame PSNR/SSIM/MS-SSIM plus mouth/eye region PSNR (from the reference
// clip's landmarks), with per-clip arithmetic means.
MetricReport evaluate_clip(const Clip& reference, const Clip& restored);

}  // namespace gavn
