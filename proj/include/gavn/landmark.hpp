#pragma once

#include "gavn/clip.hpp"
#include "gavn/layers.hpp"
#include "gavn/optim.hpp"

namespace gavn {

struct LandmarkSet {
    int count = 0;
    std::vector<double> points;      // (K, 2) pixel coordinates
    std::vector<double> confidence;  // 1.0 for the oracle path

    double x(int k) const { return points[std::size_t(k) * 2]; }
    double y(int k) const { return points[std::size_t(k) * 2 + 1]; }
};

inline LandmarkSet oracle_landmarks(const Clip& clip, int t) {
    LandmarkSet set;
    set.count = clip.landmark_count;
    set.points.assign(clip.landmarks.begin() + std::size_t(t) * set.count * 2,
                      clip.landmarks.begin() + std::size_t(t + 1) * set.count * 2);
    set.confidence.assign(std::size_t(set.count), 1.0);
    return set;
}

// One peak-normalized Gaussian bump per landmark: map_k(p) =
// exp(-|p - x_k|^2 / (2 sigma^2)) rescaled so the nearest lattice point to
// the landmark reads exactly 1.
template <class T>
Tensor4<T> render_heatmaps(const LandmarkSet& lms, int h, int w, double sigma) {
    check(sigma > 0, "render_heatmaps: sigma must be > 0");
    Tensor4<T> maps(1, lms.count, h, w);
    for (int k = 0; k < lms.count; ++k) {
        double cx = std::clamp(lms.x(k), 0.0, double(w - 1));
        double cy = std::clamp(lms.y(k), 0.0, double(h - 1));
        T* dst = maps.plane(0, k);
        double peak = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                double v = std::exp(-d2 / (2 * sigma * sigma));
                dst[std::size_t(y) * w + x] = T(v);
                peak = std::max(peak, v);
            }
        for (std::size_t i = 0; i < std::size_t(h) * w; ++i) dst[i] = T(double(dst[i]) / peak);
    }
    return maps;
}

// Small audio-assisted coordinate regressor standing in for a retrained
// landmark detector: a strided conv encoder over the degraded frame, an
// audio-window embedding, and a zero-initialized head emitting K*2
// normalized coordinates through a sigmoid.
template <class T>
struct LandmarkNet {
    int frame_h = 64, frame_w = 64, landmark_count = 8;
    int audio_samples = 3200;
    ParamStore<T> params;
    Conv2dLayer<T> d1, d2, d3;
    Conv2dLayer<T> fc1, head;  // 1x1 convs over flattened features
    Conv1dLayer<T> a1, a2;

    // returns sigmoid-normalized coordinates (1, 2K, 1, 1) in (0,1),
    // ordered (x0, y0, x1, y1, ...)
    Var<T> operator()(const Var<T>& frame, const Var<T>& audio) const {
        Shape4 fs = frame->val.shape;
        check(fs.h == frame_h && fs.w == frame_w,
              "landmark net: frame size mismatch, got " + fs.str());
        check(audio->val.shape.w == audio_samples,
              "landmark net: audio window length mismatch, got " + audio->val.shape.str());
        auto f = leaky_relu(d3(leaky_relu(d2(leaky_relu(d1(frame))))));
        auto fv = leaky_relu(fc1(flatten_chw(f)));
        auto av = spatial_mean(leaky_relu(a2(leaky_relu(a1(audio)))));
        return sigmoid(head(concat_ch<T>({fv, av})));
    }
};

template <class T>
LandmarkNet<T> build_landmark_net(int frame_h, int frame_w, int landmark_count, int audio_samples,
                                  std::uint64_t seed, int channels = 16) {
    check(frame_h % 8 == 0 && frame_w % 8 == 0,
          "landmark net: frame size must be divisible by 8");
    LandmarkNet<T> net;
    net.frame_h = frame_h;
    net.frame_w = frame_w;
    net.landmark_count = landmark_count;
    net.audio_samples = audio_samples;
    net.d1 = conv2d_layer(net.params, "lmnet.d1", 3, channels, 3, 2, seed);
    net.d2 = conv2d_layer(net.params, "lmnet.d2", channels, channels, 3, 2, seed);
    net.d3 = conv2d_layer(net.params, "lmnet.d3", channels, channels, 3, 2, seed);
    int flat = channels * (frame_h / 8) * (frame_w / 8);
    net.fc1 = conv2d_layer(net.params, "lmnet.fc1", flat, 64, 1, 1, seed);
    net.a1 = conv1d_layer(net.params, "lmnet.a1", 1, 8, 9, 4, seed);
    net.a2 = conv1d_layer(net.params, "lmnet.a2", 8, 16, 9, 4, seed);
    net.head = conv2d_layer(net.params, "lmnet.head", 64 + 16, 2 * landmark_count, 1, 1, seed,
                            /*zero_init=*/true);
    return net;
}

template <class T>
Var<T> landmark_audio_var(const Clip& clip, int t, int m, bool ablate_audio) {
    AudioWindow win = audio_window(clip, t, m);
    Tensor4<T> a(1, 1, 1, int(win.samples.size()));
    if (!ablate_audio)
        for (std::size_t i = 0; i < win.samples.size(); ++i) a.v[i] = T(win.samples[i]);
    return make_var(std::move(a), false);
}

template <class T>
Var<T> frame_var(const Clip& clip, int t, bool requires_grad = false) {
    Shape4 s = clip.frames.shape;
    Tensor4<T> f(1, s.c, s.h, s.w);
    const float* src = clip.frames.plane(t, 0);
    for (std::size_t i = 0; i < f.v.size(); ++i) f.v[i] = T(src[i]);
    return make_var(std::move(f), requires_grad);
}

template <class T>
LandmarkSet predict_landmarks(const LandmarkNet<T>& net, const Var<T>& frame, const Var<T>& audio) {
    Var<T> out = net(frame, audio);
    LandmarkSet set;
    set.count = net.landmark_count;
    set.points.resize(std::size_t(net.landmark_count) * 2);
    set.confidence.assign(std::size_t(net.landmark_count), 0.5);
    for (int k = 0; k < net.landmark_count; ++k) {
        set.points[std::size_t(k) * 2] = double(out->val.v[std::size_t(k) * 2]) * (net.frame_w - 1);
        set.points[std::size_t(k) * 2 + 1] =
            double(out->val.v[std::size_t(k) * 2 + 1]) * (net.frame_h - 1);
    }
    return set;
}

struct LandmarkTrainReport {
    double initial_loss = 0;
    double final_loss = 0;
    double mean_pixel_error = 0;  // on the training pairs, after training
    int steps = 0;
};

// Trains on degraded frames against the pristine clips' analytic landmarks.
// Pairs must be aligned index-wise: degraded[i] is a distorted copy of
// pristine[i]. Deterministic under the seed.
template <class T>
LandmarkTrainReport train_landmark_net(LandmarkNet<T>& net, const std::vector<Clip>& degraded,
                                       const std::vector<Clip>& pristine, int epochs, double lr,
                                       std::uint64_t seed, int m, bool ablate_audio = false,
                                       int samples_per_epoch = 64) {
    check(degraded.size() == pristine.size() && !degraded.empty(),
          "train_landmark_net: need aligned non-empty clip lists");
    AdamState<T> adam;
    std::vector<std::string> names;
    for (const auto& [name, p] : net.params.params) {
        (void)p;
        names.push_back(name);
    }

    auto target_of = [&](const Clip& gt, int t) {
        Tensor4<T> target(1, 2 * net.landmark_count, 1, 1);
        for (int k = 0; k < net.landmark_count; ++k) {
            target.v[std::size_t(k) * 2] = T(gt.landmark_x(t, k) / (net.frame_w - 1));
            target.v[std::size_t(k) * 2 + 1] = T(gt.landmark_y(t, k) / (net.frame_h - 1));
        }
        return target;
    };

    LandmarkTrainReport rep;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        Rng rng(mix_seed(seed, 0x1a7d + std::uint64_t(epoch)));
        for (int s = 0; s < samples_per_epoch; ++s) {
            int ci = rng.uniform_int(0, int(degraded.size()) - 1);
            int t = rng.uniform_int(0, degraded[std::size_t(ci)].frame_count() - 1);
            auto frame = frame_var<T>(degraded[std::size_t(ci)], t);
            auto audio = landmark_audio_var<T>(degraded[std::size_t(ci)], t, m, ablate_audio);
            net.params.zero_grad();
            auto loss = mse_loss(net(frame, audio), target_of(pristine[std::size_t(ci)], t));
            double lv = double(loss->val.v[0]);
            if (!std::isfinite(lv))
                throw std::runtime_error("train_landmark_net: loss diverged at step " +
                                         std::to_string(rep.steps));
            if (rep.steps == 0) rep.initial_loss = lv;
            rep.final_loss = lv;
            backward(loss);
            adam_step(net.params, names, adam, lr);
            rep.steps += 1;
        }
    }

    // mean pixel error over all training frames
    double err = 0;
    std::int64_t n = 0;
    for (std::size_t ci = 0; ci < degraded.size(); ++ci)
        for (int t = 0; t < degraded[ci].frame_count(); ++t) {
            auto frame = frame_var<T>(degraded[ci], t);
            auto audio = landmark_audio_var<T>(degraded[ci], t, m, ablate_audio);
            LandmarkSet pred = predict_landmarks(net, frame, audio);
            for (int k = 0; k < net.landmark_count; ++k) {
                double dx = pred.x(k) - pristine[ci].landmark_x(t, k);
                double dy = pred.y(k) - pristine[ci].landmark_y(t, k);
                err += std::sqrt(dx * dx + dy * dy);
                ++n;
            }
        }
    rep.mean_pixel_error = err / double(n);
    return rep;
}

}  // namespace gavn
