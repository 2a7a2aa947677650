#pragma once

#include <string>
#include <vector>

#include "inrpatch/config.hpp"
#include "inrpatch/data.hpp"
#include "inrpatch/trainer.hpp"

namespace inrpatch {

struct ModeProfile {
    RunMode mode = RunMode::Multistage;
    int64_t gen_fwd = 0;      // generator synthesis activations per iteration
    int64_t fwd_total = 0;    // generator + discriminator forward activations per iteration
    int64_t peak_floats = 0;  // high-water mark over the profiled iterations
    double median_wall_ms = 0.0;
};

struct ProfileReport {
    int H = 0, batch = 0, iters = 0;
    std::vector<ModeProfile> rows; // image_based, patch_based, multistage
    const ModeProfile& row(RunMode m) const;
    std::string table() const;
};

// Runs k instrumented training iterations per mode at equal H and batch.
// Multistage is profiled in its stage-1 regime, where its schedule differs
// from the patch-based baseline (no random cropping).
ProfileReport run_profile(const RunConfig& base, const std::shared_ptr<const Dataset>& data, int k);

} // namespace inrpatch
