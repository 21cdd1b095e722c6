#pragma once

#include <array>
#include <optional>

#include "gavn/tensor.hpp"

namespace gavn {

// Landmark indices used throughout; K may exceed 8, extra points sit on the
// head outline.
enum LandmarkId : int {
    kEyeL = 0,
    kEyeR = 1,
    kMouthCornerL = 2,
    kMouthCornerR = 3,
    kMouthTop = 4,
    kMouthBottom = 5,
    kNose = 6,
    kChin = 7,
};

struct SceneParams {
    int h = 64;
    int w = 64;
    int landmark_count = 8;
    double head_amplitude = 3.0;  // max |translation| in pixels
    double blink_rate = 0.5;      // events per second
    std::uint64_t texture_seed = 0;

    void validate() const {
        check(h >= 32 && w >= 32, "SceneParams: frame size must be >= 32");
        check(landmark_count >= 8, "SceneParams: need at least 8 landmarks");
        check(head_amplitude >= 0, "SceneParams: head_amplitude must be >= 0");
    }
};

struct DegradationInfo {
    std::string kind;  // compression | blur | low_resolution
    double level = 0;
    std::uint64_t seed = 0;
};

struct ProvenanceInfo {
    std::string checkpoint_hash;
    std::string config_json;
};

// The unit of all data flow: ground-truth (or degraded/restored) frames plus
// the audio track and per-frame landmarks.
struct Clip {
    Tensor4<float> frames;               // (T, 3, H, W) in [0,1]
    std::vector<float> audio;            // (S,) mono in [-1,1]
    int fps = 25;
    int sample_rate = 16000;
    std::vector<double> landmarks;       // (T, K, 2) row-major, pixel coords
    std::vector<double> env;             // per-frame audio envelope in [0,1]
    int landmark_count = 8;
    std::uint64_t seed = 0;
    std::optional<DegradationInfo> degradation;
    std::optional<ProvenanceInfo> provenance;

    int frame_count() const { return frames.shape.b; }
    int height() const { return frames.shape.h; }
    int width() const { return frames.shape.w; }
    int samples_per_frame() const { return sample_rate / fps; }

    double landmark_x(int t, int k) const {
        return landmarks[(std::size_t(t) * landmark_count + k) * 2];
    }
    double landmark_y(int t, int k) const {
        return landmarks[(std::size_t(t) * landmark_count + k) * 2 + 1];
    }

    void validate() const;
};

struct AudioTrack {
    std::vector<float> samples;
    std::vector<double> env;  // one value per frame
};

// Per-frame analytic scene state; landmarks and rendering both derive from
// it, which is what makes the landmark oracle exact.
struct FrameState {
    double cx = 0, cy = 0;  // head center
    int aperture_px = 0;    // rounded mouth opening height
    bool blink = false;
    double env = 0;
};

// Deterministic waveform made of smoothed bursts. Burst centers are kept
// away from t=0 so the clip opens with exact silence (env == 0).
AudioTrack gen_audio(double duration_s, int sample_rate, int fps, std::uint64_t seed);

std::vector<FrameState> build_scene_track(const SceneParams& params, int frame_count, int fps,
                                          const std::vector<double>& env, std::uint64_t seed);

std::array<double, 2> scene_landmark(const SceneParams& params, const FrameState& st, int index);

void render_frame(const SceneParams& params, const FrameState& st, float* rgb_planes);

Clip gen_clip(const SceneParams& params, double duration_s, std::uint64_t seed);

struct AudioWindow {
    std::vector<float> samples;  // fixed length (2m+1) * sample_rate / fps
    std::vector<double> env;     // 2m+1 values
};

// Audio spanning frames [t-m, t+m], zero-padded at clip boundaries.
AudioWindow audio_window(const Clip& clip, int t, int m);

// Disk container: manifest.json + frames/%06d.png + audio.wav + landmarks.json.
void save_clip(const Clip& clip, const std::string& dir);
Clip load_clip(const std::string& dir);

}  // namespace gavn
