#include "gavn/clip.hpp"

#include <algorithm>

namespace gavn {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Geometry as fractions of the frame; every shape is drawn relative to the
// head center so the whole face translates rigidly.
struct FaceGeometry {
    double head_rx, head_ry;
    double eye_dx, eye_dy, eye_r, pupil_r;
    double nose_dy, nose_r;
    double mouth_dy, mouth_half_w, lip_t;
    double aperture_max;
    double chin_dy;

    explicit FaceGeometry(const SceneParams& p) {
        // the head (and the chin landmark on its rim) must stay inside the
        // frame at maximum translation
        head_rx = std::min(0.34 * p.w, p.w / 2.0 - p.head_amplitude - 2.0);
        head_ry = std::min(0.42 * p.h, p.h / 2.0 - p.head_amplitude - 2.0);
        eye_dx = 0.14 * p.w;
        eye_dy = -0.13 * p.h;
        eye_r = 0.055 * p.h;
        pupil_r = 0.026 * p.h;
        nose_dy = 0.04 * p.h;
        nose_r = 0.030 * p.h;
        mouth_dy = 0.22 * p.h;
        mouth_half_w = 0.15 * p.w;
        lip_t = 0.035 * p.h;
        aperture_max = 0.16 * p.h;
        chin_dy = head_ry;
    }
};

// 1px-soft coverage from a signed distance (d < 0 inside).
inline double cov(double d) { return std::clamp(0.5 - d, 0.0, 1.0); }

inline double ellipse_sdf(double x, double y, double rx, double ry) {
    // approximate but smooth and exact on the axes, fine for rendering
    double k = std::sqrt((x * x) / (rx * rx) + (y * y) / (ry * ry));
    return (k - 1.0) * std::min(rx, ry);
}

inline double circle_sdf(double x, double y, double r) {
    return std::sqrt(x * x + y * y) - r;
}

inline double box_sdf(double x, double y, double hx, double hy) {
    double qx = std::abs(x) - hx, qy = std::abs(y) - hy;
    double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
    return std::sqrt(ox * ox + oy * oy) + std::min(std::max(qx, qy), 0.0);
}

struct Rgb {
    double r, g, b;
};

inline void blend(Rgb& dst, const Rgb& src, double alpha) {
    dst.r += (src.r - dst.r) * alpha;
    dst.g += (src.g - dst.g) * alpha;
    dst.b += (src.b - dst.b) * alpha;
}

}  // namespace

void Clip::validate() const {
    check(frames.shape.c == 3, "Clip: frames must be (T,3,H,W)");
    check(sample_rate % fps == 0, "Clip: sample_rate must be divisible by fps");
    check(audio.size() == std::size_t(frame_count()) * std::size_t(samples_per_frame()),
          "Clip: audio length must equal T * sample_rate / fps");
    check(landmarks.size() == std::size_t(frame_count()) * landmark_count * 2,
          "Clip: landmark array must be (T,K,2)");
    check(env.size() == std::size_t(frame_count()), "Clip: env must have one value per frame");
    for (float v : frames.v) check(v >= 0.0f && v <= 1.0f, "Clip: frame values must be in [0,1]");
    for (int t = 0; t < frame_count(); ++t)
        for (int k = 0; k < landmark_count; ++k) {
            double x = landmark_x(t, k), y = landmark_y(t, k);
            check(x >= 0 && x <= width() - 1 && y >= 0 && y <= height() - 1,
                  "Clip: landmark outside frame at t=" + std::to_string(t));
        }
}

AudioTrack gen_audio(double duration_s, int sample_rate, int fps, std::uint64_t seed) {
    check(duration_s > 0, "gen_audio: duration must be > 0");
    check(sample_rate % fps == 0, "gen_audio: sample_rate must be divisible by fps");
    int frames = int(std::lround(duration_s * fps));
    check(frames >= 1, "gen_audio: duration too short for one frame");
    int spf = sample_rate / fps;
    std::size_t total = std::size_t(frames) * std::size_t(spf);

    Rng rng(mix_seed(seed, 0xa0d10));
    int bursts = std::max(1, int(std::lround(duration_s * 2)) + rng.uniform_int(0, 2));
    std::vector<double> center(std::size_t(bursts), 0.0), width(std::size_t(bursts), 0.0),
        amp(std::size_t(bursts), 0.0), freq(std::size_t(bursts), 0.0);
    double t_end = double(frames) / fps;
    for (int i = 0; i < bursts; ++i) {
        // keep burst mass clear of t=0 so early frames are exactly silent
        center[std::size_t(i)] = rng.uniform(0.35, std::max(0.40, t_end - 0.05));
        width[std::size_t(i)] = rng.uniform(0.05, 0.12);
        amp[std::size_t(i)] = rng.uniform(0.5, 1.0);
        freq[std::size_t(i)] = rng.uniform(90.0, 280.0);
    }

    // raw envelope with a small floor subtracted: far from every burst the
    // envelope is exactly zero, not merely tiny
    const double floor_v = 0.02;
    auto envelope = [&](double t) {
        double e = 0;
        for (int i = 0; i < bursts; ++i) {
            double d = (t - center[std::size_t(i)]) / width[std::size_t(i)];
            e += amp[std::size_t(i)] * std::exp(-0.5 * d * d);
        }
        return std::clamp((e - floor_v) / (1.0 - floor_v), 0.0, 1.0);
    };

    AudioTrack out;
    out.samples.resize(total);
    for (std::size_t s = 0; s < total; ++s) {
        double t = double(s) / sample_rate;
        double e = envelope(t);
        double wave = 0;
        if (e > 0) {
            for (int i = 0; i < bursts; ++i) {
                double d = (t - center[std::size_t(i)]) / width[std::size_t(i)];
                wave += amp[std::size_t(i)] * std::exp(-0.5 * d * d) *
                        std::sin(2.0 * kPi * freq[std::size_t(i)] * (t - center[std::size_t(i)]));
            }
            wave = std::clamp(wave, -1.0, 1.0) * e;
        }
        out.samples[s] = float(wave);
    }
    out.env.resize(std::size_t(frames));
    for (int f = 0; f < frames; ++f)
        out.env[std::size_t(f)] = envelope((f + 0.5) / double(fps));
    return out;
}

std::vector<FrameState> build_scene_track(const SceneParams& params, int frame_count, int fps,
                                          const std::vector<double>& env, std::uint64_t seed) {
    params.validate();
    check(int(env.size()) == frame_count, "build_scene_track: env size mismatch");
    FaceGeometry geo(params);

    Rng motion(mix_seed(seed, 0x301709));
    double f1 = motion.uniform(0.25, 0.55), p1 = motion.uniform(0, 2 * kPi);
    double f2 = motion.uniform(0.30, 0.65), p2 = motion.uniform(0, 2 * kPi);
    double f3 = motion.uniform(0.25, 0.55), p3 = motion.uniform(0, 2 * kPi);
    double f4 = motion.uniform(0.30, 0.65), p4 = motion.uniform(0, 2 * kPi);
    Rng blinks(mix_seed(seed, 0xb111c));
    double blink_p = std::clamp(params.blink_rate / fps, 0.0, 1.0);

    std::vector<FrameState> states(std::size_t(frame_count), FrameState{});
    for (int t = 0; t < frame_count; ++t) {
        double tau = double(t) / fps;
        FrameState& st = states[std::size_t(t)];
        st.cx = params.w / 2.0 +
                params.head_amplitude * (0.65 * std::sin(2 * kPi * f1 * tau + p1) +
                                         0.35 * std::sin(2 * kPi * f2 * tau + p2));
        st.cy = params.h / 2.0 +
                params.head_amplitude * (0.65 * std::sin(2 * kPi * f3 * tau + p3) +
                                         0.35 * std::sin(2 * kPi * f4 * tau + p4));
        st.env = env[std::size_t(t)];
        st.aperture_px = int(std::lround(geo.aperture_max * st.env));
        st.blink = blinks.uniform() < blink_p;
    }
    return states;
}

std::array<double, 2> scene_landmark(const SceneParams& params, const FrameState& st, int index) {
    FaceGeometry geo(params);
    double mcy = st.cy + geo.mouth_dy;
    switch (index) {
        case kEyeL: return {st.cx - geo.eye_dx, st.cy + geo.eye_dy};
        case kEyeR: return {st.cx + geo.eye_dx, st.cy + geo.eye_dy};
        case kMouthCornerL: return {st.cx - geo.mouth_half_w, mcy};
        case kMouthCornerR: return {st.cx + geo.mouth_half_w, mcy};
        case kMouthTop: return {st.cx, mcy - st.aperture_px / 2.0};
        case kMouthBottom: return {st.cx, mcy + st.aperture_px / 2.0};
        case kNose: return {st.cx, st.cy + geo.nose_dy};
        case kChin: return {st.cx, st.cy + geo.chin_dy};
        default: {
            // extra landmarks on the head outline at fixed angles
            double ang = 2 * kPi * double(index - 8) / std::max(1, params.landmark_count - 8);
            return {st.cx + geo.head_rx * std::cos(ang) * 0.95,
                    st.cy + geo.head_ry * std::sin(ang) * 0.95};
        }
    }
}

void render_frame(const SceneParams& params, const FrameState& st, float* rgb) {
    FaceGeometry geo(params);
    int H = params.h, W = params.w;
    Rng tex(mix_seed(params.texture_seed, 0x7e47));
    double bg_f1 = tex.uniform(0.05, 0.10), bg_f2 = tex.uniform(0.04, 0.09);
    double bg_p1 = tex.uniform(0, 2 * kPi), bg_p2 = tex.uniform(0, 2 * kPi);
    int stripe_period = std::max(3, int(std::lround(0.055 * W)));

    const Rgb skin{0.80, 0.63, 0.52};
    const Rgb lip{0.48, 0.16, 0.18};
    const Rgb cavity{0.22, 0.08, 0.10};
    const Rgb tooth{0.93, 0.91, 0.85};
    const Rgb sclera{0.95, 0.95, 0.93};
    const Rgb pupil{0.09, 0.07, 0.10};
    const Rgb nose_c{0.62, 0.45, 0.38};

    double mcy_off = geo.mouth_dy;
    double half_ap = st.aperture_px / 2.0;

    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            double px = x + 0.5, py = y + 0.5;
            double rx = px - st.cx, ry = py - st.cy;

            // background: two crossed waves, fixed to the frame (not the head)
            double b1 = std::sin(2 * kPi * bg_f1 * px + bg_p1);
            double b2 = std::sin(2 * kPi * bg_f2 * py + bg_p2);
            Rgb c{0.18 + 0.06 * b1 + 0.05 * b2, 0.20 + 0.05 * b2, 0.26 + 0.06 * b1};

            // head with a slight vertical shade
            double dh = ellipse_sdf(rx, ry, geo.head_rx, geo.head_ry);
            double shade = 1.0 - 0.15 * (ry / geo.head_ry);
            blend(c, Rgb{skin.r * shade, skin.g * shade, skin.b * shade}, cov(dh));
            double head_in = cov(dh);

            if (head_in > 0) {
                // mouth: lips frame the opening; the opening reveals teeth
                double mx = rx, my = py - (st.cy + mcy_off);
                double opening = box_sdf(mx, my, geo.mouth_half_w * 0.92, half_ap);
                double lips = box_sdf(mx, my, geo.mouth_half_w, half_ap + geo.lip_t);
                blend(c, lip, cov(lips) * head_in);
                if (st.aperture_px > 0) {
                    int bright_w = std::max(1, std::min(stripe_period - 1,
                                                        int(std::lround(0.7 * stripe_period))));
                    bool bright = ((int(std::floor(mx + 1000.0 * stripe_period)) % stripe_period) <
                                   bright_w);
                    Rgb interior = bright ? tooth : cavity;
                    blend(c, interior, cov(opening) * head_in);
                }

                // eyes
                for (int side = -1; side <= 1; side += 2) {
                    double ex = rx - side * geo.eye_dx, ey = ry - geo.eye_dy;
                    if (st.blink) {
                        double lid = box_sdf(ex, ey, geo.eye_r, geo.eye_r * 0.18);
                        blend(c, Rgb{0.30, 0.18, 0.16}, cov(lid) * head_in);
                    } else {
                        blend(c, sclera, cov(circle_sdf(ex, ey, geo.eye_r)) * head_in);
                        blend(c, pupil, cov(circle_sdf(ex, ey, geo.pupil_r)) * head_in);
                    }
                }

                // nose
                blend(c, nose_c, cov(circle_sdf(rx, ry - geo.nose_dy, geo.nose_r)) * head_in);
            }

            std::size_t idx = std::size_t(y) * W + x;
            std::size_t hw = std::size_t(H) * W;
            rgb[idx] = float(std::clamp(c.r, 0.0, 1.0));
            rgb[idx + hw] = float(std::clamp(c.g, 0.0, 1.0));
            rgb[idx + 2 * hw] = float(std::clamp(c.b, 0.0, 1.0));
        }
}

Clip gen_clip(const SceneParams& params, double duration_s, std::uint64_t seed) {
    params.validate();
    int fps = 25, sample_rate = 16000;
    AudioTrack track = gen_audio(duration_s, sample_rate, fps, mix_seed(seed, 0xad10));
    int T = int(track.env.size());
    std::vector<FrameState> states =
        build_scene_track(params, T, fps, track.env, mix_seed(seed, 0x5ce9e));

    Clip clip;
    clip.fps = fps;
    clip.sample_rate = sample_rate;
    clip.landmark_count = params.landmark_count;
    clip.seed = seed;
    clip.audio = std::move(track.samples);
    clip.env = std::move(track.env);
    clip.frames = Tensor4<float>(T, 3, params.h, params.w);
    clip.landmarks.resize(std::size_t(T) * params.landmark_count * 2);
    for (int t = 0; t < T; ++t) {
        render_frame(params, states[std::size_t(t)], clip.frames.plane(t, 0));
        for (int k = 0; k < params.landmark_count; ++k) {
            auto [lx, ly] = scene_landmark(params, states[std::size_t(t)], k);
            clip.landmarks[(std::size_t(t) * params.landmark_count + k) * 2] = lx;
            clip.landmarks[(std::size_t(t) * params.landmark_count + k) * 2 + 1] = ly;
        }
    }
    clip.validate();
    return clip;
}

AudioWindow audio_window(const Clip& clip, int t, int m) {
    check(t >= 0 && t < clip.frame_count(), "audio_window: frame index out of range");
    check(m >= 0, "audio_window: m must be >= 0");
    int spf = clip.samples_per_frame();
    AudioWindow win;
    win.samples.assign(std::size_t(2 * m + 1) * std::size_t(spf), 0.0f);
    win.env.assign(std::size_t(2 * m + 1), 0.0);
    std::int64_t total = std::int64_t(clip.audio.size());
    for (int f = -m; f <= m; ++f) {
        int src_frame = t + f;
        if (src_frame < 0 || src_frame >= clip.frame_count()) continue;
        win.env[std::size_t(f + m)] = clip.env[std::size_t(src_frame)];
        std::int64_t src0 = std::int64_t(src_frame) * spf;
        std::int64_t dst0 = std::int64_t(f + m) * spf;
        for (int s = 0; s < spf; ++s)
            if (src0 + s >= 0 && src0 + s < total)
                win.samples[std::size_t(dst0 + s)] = clip.audio[std::size_t(src0 + s)];
    }
    return win;
}

}  // namespace gavn
