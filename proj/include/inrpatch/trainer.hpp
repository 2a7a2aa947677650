#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "inrpatch/config.hpp"
#include "inrpatch/data.hpp"
#include "inrpatch/discriminator.hpp"
#include "inrpatch/generator.hpp"
#include "inrpatch/losses.hpp"
#include "inrpatch/tensor.hpp"

namespace inrpatch {

// Resolved per-stage hyperparameters. A stage is also how the baseline
// modes run: image_based is N = crop = H, patch_based is N = H with crops.
struct StageConfig {
    int stage = 1;       // 1..3 for the schedule, 0 for baseline modes
    int N = 0;           // lattice density for fakes and the real pyramid level
    int crop_side = 0;   // window side; crop_side == N means no rcrop
    int iters = 0;
    int batch = 4;
    float lambda_patch = 0.0f; // 0 in stage 1 and in baselines
    float d_reg_weight = 1.0f;
    int d_reg_every = 16;
    float d_reg_eps = 0.01f;
    bool squared_l2 = false;

    bool use_rcrop() const { return crop_side < N; }
};

struct TrainingMetrics {
    int iter = 0;  // global, monotone across stages
    int stage = 0;
    float g_loss = 0.0f;     // adversarial G term
    float d_loss = 0.0f;     // full D objective (incl. scheduled regularizer)
    float patch_loss = 0.0f; // 0 when no regularizer
    int64_t gen_fwd = 0;     // generator synthesis activations this iteration
    int64_t fwd_count = 0;   // generator + discriminator forward activations
    int64_t peak_floats = 0; // peak simultaneously-live floats on the tape
    double wall_ms = 0.0;
    double pfd = -1.0;       // optional, filled by evaluation helpers only
};

StageConfig multistage_config(const RunConfig& cfg, int stage);
StageConfig baseline_config(const RunConfig& cfg);

std::string metrics_csv_header();
std::string metrics_csv_row(const TrainingMetrics& m, bool record_wall_ms);

class Trainer {
public:
    Trainer(RunConfig cfg, std::shared_ptr<const Dataset> data);

    // Full run for cfg.mode: checkpoints, metrics CSV and optional sample
    // sheets under cfg.out_dir.
    void run();

    // One adversarial stage over gen/disc. frozen is the previous-stage
    // generator for the patch regularizer (multistage stages 2-3).
    std::vector<TrainingMetrics> run_stage(const StageConfig& sc, GeneratorParams& gen,
                                           const GeneratorParams* frozen, DiscParams& disc,
                                           AdamState& adam_g, AdamState& adam_d, Rng& rng,
                                           int& global_iter, std::ostream* csv);

    const RunConfig& config() const { return cfg_; }
    const Dataset& dataset() const { return *data_; }

    // final generator of the last run() (for tests)
    const GeneratorParams& final_generator() const { return gen_; }

private:
    void run_multistage();
    void run_baseline();
    void write_sample_sheet(const GeneratorParams& gen, int stage, int iter) const;

    RunConfig cfg_;
    std::shared_ptr<const Dataset> data_;
    GeneratorParams gen_;
    Tape tape_;
};

// Per-iteration draw order (one Rng owns the whole run):
//   1. D phase: per sample, 128-dim z; then window origin (row, col) when
//      cropping; then real index and real offsets; then d_reg direction on
//      scheduled iterations.
//   2. G phase: per sample z, then window origin.
// This ordering is part of the determinism contract.

} // namespace inrpatch
