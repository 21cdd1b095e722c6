#pragma once

#include "gavn/tensor.hpp"

namespace gavn {

struct ModelConfig {
    int n = 1;         // temporal radius: 2n+5 input frames, 2n+1 outputs
    int channels = 16;
    int frame_h = 64;
    int frame_w = 64;
    int audio_half_frames = 2;          // m in the audio window t +- m
    int audio_samples_per_frame = 640;  // sample_rate / fps
    int landmark_count = 8;
    double heatmap_sigma = 2.0;
    std::string attention_target = "paper";  // paper | per_branch
    std::string landmark_source = "oracle";  // oracle | learned
    std::uint64_t init_seed = 1;

    int window_frames() const { return 2 * n + 5; }
    int output_frames() const { return 2 * n + 1; }
    int audio_window_samples() const {
        return (2 * audio_half_frames + 1) * audio_samples_per_frame;
    }

    void validate() const {
        check(n >= 1, "ModelConfig: n must be >= 1");
        check(channels >= 1, "ModelConfig: channels must be >= 1");
        check(frame_h % 4 == 0 && frame_w % 4 == 0,
              "ModelConfig: frame size must be divisible by 4");
        check(audio_half_frames >= 0, "ModelConfig: m must be >= 0");
        check(landmark_count >= 8, "ModelConfig: need at least 8 landmarks");
        check(attention_target == "paper" || attention_target == "per_branch",
              "ModelConfig: attention_target must be 'paper' or 'per_branch'");
        check(landmark_source == "oracle" || landmark_source == "learned",
              "ModelConfig: landmark_source must be 'oracle' or 'learned'");
    }
};

}  // namespace gavn
