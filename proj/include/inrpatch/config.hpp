#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "inrpatch/discriminator.hpp"
#include "inrpatch/generator.hpp"
#include "inrpatch/tensor.hpp"

namespace inrpatch {

enum class RunMode : uint8_t { Multistage, ImageBased, PatchBased };

RunMode run_mode_from_string(const std::string& s);
std::string to_string(RunMode m);

struct TrainSettings {
    int batch = 4;
    std::array<int, 3> iters{200, 200, 200}; // per stage; baselines use the sum
    float lambda_patch = 1.0f;
    float d_reg_weight = 1.0f;
    int d_reg_every = 16;
    float d_reg_eps = 0.01f;
    int sample_interval = 0;  // 0 = no sample sheets during training
    bool record_wall_ms = false; // measured wall time in the CSV breaks rerun byte-identity
    bool reset_d = false;        // reset the discriminator at stage transitions
    bool squared_patch_l2 = false;
    int crop_side = 0; // 0 -> H/4
};

struct RunConfig {
    uint64_t seed = 7;
    int image_size = 64;
    RunMode mode = RunMode::Multistage;
    std::string dataset_source = "procedural"; // procedural | folder
    int dataset_count = 64;
    std::string dataset_path;
    std::string out_dir = "out";
    GenConfig gen;
    DiscConfig disc; // in_side derived from image_size and crop
    AdamConfig optim;
    TrainSettings train;

    int crop_side() const { return train.crop_side > 0 ? train.crop_side : image_size / 4; }
    void validate() const;
};

// Strict JSON round-trip: unknown keys anywhere are errors.
RunConfig parse_config(const std::string& json_text);
std::string serialize_config(const RunConfig& cfg);
RunConfig load_config_file(const std::string& path);

} // namespace inrpatch
