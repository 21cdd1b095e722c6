#pragma once

#include "gavn/config.hpp"
#include "gavn/landmark.hpp"
#include "gavn/model.hpp"
#include "gavn/optim.hpp"

namespace gavn {

// --- checkpoints -------------------------------------------------------------

struct CheckpointMeta {
    std::string stage;  // stage1 | stage2_warmup | stage2_finetune | landmark_net
    int epoch = 0;      // completed global epochs
    std::uint64_t seed = 0;
    std::int64_t adam_step = 0;
    std::int64_t step_counter = 0;
    std::string config_json;  // model + train config echo
};

// Binary layout: 8-byte magic, u64 LE header length, header JSON, then
// concatenated little-endian float32 arrays. The manifest tiles the payload
// exactly; loading is rejected on unknown names, shape mismatches or size
// disagreements. Save -> load -> save is byte-identical.
void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                     const AdamState<float>& adam, const CheckpointMeta& meta);
CheckpointMeta load_checkpoint(const std::string& path, ParamStore<float>& params,
                               AdamState<float>& adam);
CheckpointMeta read_checkpoint_meta(const std::string& path);

// --- training ----------------------------------------------------------------

struct TrainSet {
    std::vector<Clip> degraded;
    std::vector<Clip> truth;  // aligned index-wise

    void validate() const {
        check(!degraded.empty() && degraded.size() == truth.size(),
              "TrainSet: need aligned non-empty clip lists");
    }
};

struct EpochSpec {
    int global = 0;
    std::string stage;
    int epoch_in_stage = 0;
    double lr = 0;
    std::string group;  // parameter group updated this epoch
};

// stage1 epochs, then warmup (identity+reconstruction), then finetune
// (entire model). With ablate == "no-identity" the whole budget stays in
// stage 1: the temporal-only model of the identity ablation.
std::vector<EpochSpec> training_schedule(const TrainConfig& cfg);

struct TrainLogEntry {
    std::string kind;  // step | epoch
    std::int64_t step = 0;
    int epoch = 0;
    std::string stage;
    double lr = 0;
    double loss = 0;
    double wall_time = 0;
};

std::string log_entry_json(const TrainLogEntry& e);

// Inputs for one forward window plus the ground-truth target frames.
struct WindowTensors {
    Var<float> frames;
    std::vector<Var<float>> audio;
    std::vector<Var<float>> heatmaps;
    Tensor4<float> truth;
};

// Window starting at frame t0 (t0 + 2..t0 + 2n+2 are the supervised
// outputs). Audio windows are zeroed under the no-audio ablation; heatmaps
// come from the oracle landmarks or a trained regressor.
WindowTensors build_window(const ModelConfig& cfg, const Clip& degraded, const Clip& truth,
                           int t0, bool ablate_audio, const LandmarkNet<float>* lmnet);

struct TrainState {
    TrainConfig cfg;
    ModelConfig model_cfg;
    AdamState<float> adam;
    int next_epoch = 0;
    std::string active_stage;
    std::int64_t step_counter = 0;
    std::vector<TrainLogEntry> log;
};

// Runs the schedule from state.next_epoch. When run_dir is non-empty,
// writes ckpt_latest.gavnckpt each epoch, ckpt_stage1.gavnckpt at the end
// of stage 1, ckpt_final.gavnckpt at the end, and appends line-delimited
// JSON to train_log.jsonl. max_epochs > 0 bounds the epochs executed in
// this call (the interrupt/resume hook). Returns true when the schedule
// finished.
bool train_run(GavnModel<float>& model, TrainState& state, const TrainSet& data,
               const std::string& run_dir, int max_epochs = -1,
               const LandmarkNet<float>* lmnet = nullptr);

// Loads ckpt_latest.gavnckpt from run_dir into model + state (resume).
// Returns false when no checkpoint exists.
bool try_resume(const std::string& run_dir, GavnModel<float>& model, TrainState& state);

// Sliding-window restoration in strides of 2n+1 output frames; boundary
// windows replicate edge frames. Landmarks/audio are taken from the input
// clip; `temporal_only` switches to the stage-1 head path.
Clip restore_clip(const GavnModel<float>& model, const Clip& input, bool temporal_only,
                  bool ablate_audio = false, const LandmarkNet<float>* lmnet = nullptr);

}  // namespace gavn
