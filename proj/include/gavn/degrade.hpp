#pragma once

#include "gavn/clip.hpp"

namespace gavn {

struct DegradationSpec {
    std::string kind;  // compression | blur | low_resolution
    double level = 0;  // quantization step | odd kernel size | downsampling factor
    std::uint64_t seed = 0;

    void validate() const {
        if (kind == "compression") {
            check(level > 0, "DegradationSpec: compression quality step must be > 0");
        } else if (kind == "blur") {
            int k = int(level);
            check(double(k) == level && k >= 3 && k % 2 == 1,
                  "DegradationSpec: blur kernel size must be an odd integer >= 3");
        } else if (kind == "low_resolution") {
            int f = int(level);
            check(double(f) == level && f >= 2 && f <= 8,
                  "DegradationSpec: downsampling factor must be an integer in [2, 8]");
        } else {
            check(false, "DegradationSpec: unknown kind '" + kind + "'");
        }
    }
};

// sigma convention for a given kernel size.
inline double gaussian_sigma_for_kernel(int kernel_size) {
    return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

// Normalized 1-D Gaussian taps (sum exactly renormalized to 1).
std::vector<double> gaussian_kernel(int kernel_size);

// Separable Gaussian blur with reflect padding; any (B,C,H,W) layout.
Tensor4<float> gaussian_blur(const Tensor4<float>& frames, int kernel_size);

// Catmull-Rom (a = -0.5) separable resize, reflect boundary. Rows are
// resampled vertically first, then horizontally.
Tensor4<float> resize_bicubic(const Tensor4<float>& frames, int out_h, int out_w);

// Output size round(H/scale) x round(W/scale): scale > 1 downsamples,
// scale < 1 upsamples. Rejects outputs smaller than 8x8.
Tensor4<float> bicubic_resize(const Tensor4<float>& frames, double scale);

// Blockwise 8x8 DCT quantization; the stand-in for codec compression.
// Larger steps produce stronger blocking/ringing artifacts.
Tensor4<float> compress_proxy(const Tensor4<float>& frames, double quality_step);

// Applies the distortion per frame. Audio, envelope and landmarks are copied
// unchanged; low_resolution clips are upsampled back to the original size.
Clip degrade_clip(const Clip& clip, const DegradationSpec& spec);

}  // namespace gavn
