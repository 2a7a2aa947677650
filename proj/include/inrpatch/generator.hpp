#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "inrpatch/coords.hpp"
#include "inrpatch/tensor.hpp"

namespace inrpatch {

// Re-initialization policy for the learned-constant lattice at stage
// transitions. Remove drops the lattice entirely, in every stage.
enum class InitStrategy : uint8_t { Random = 0, Nearest = 1, Bilinear = 2, Remove = 3 };

InitStrategy init_strategy_from_string(const std::string& s);
std::string to_string(InitStrategy s);

struct GenConfig {
    int z_dim = 128;
    int w_dim = 64;
    int embed_pairs = 64;   // sin/cos pairs; embedding width is 2x this
    int const_dim = 32;
    int layers = 6;
    int width = 128;
    float fourier_sigma = 10.0f;
    float lrelu_slope = 0.2f;
    InitStrategy init = InitStrategy::Nearest;

    bool operator==(const GenConfig&) const = default;
};

struct SynthLayer {
    Tensor w, b;          // dense weight [in,width] and bias [width]
    Tensor aff_w, aff_b;  // style affine: w_vec -> per-channel scale [width]
};

// All learnable state of one stage's generator. The Fourier basis is fixed
// at stage-1 init and copied verbatim across stages.
struct GeneratorParams {
    GenConfig cfg;
    int H = 0;       // training resolution the schedule is derived from
    int stage = 1;   // 1..3
    int grid_n = 0;  // full-lattice side at this stage (N_i); const_grid resolution

    Tensor map_w1, map_b1, map_w2, map_b2;
    Tensor fourier;            // [embed_pairs, 2], non-learnable
    std::vector<SynthLayer> synth;
    Tensor rgb_w, rgb_b;
    Tensor const_grid;         // [grid_n^2, const_dim]; empty data if Remove

    bool has_const() const { return cfg.init != InitStrategy::Remove; }
    void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
    void for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

// Fresh seeded parameters with the const lattice at the given stage's
// density (baseline modes initialize directly at stage 3).
GeneratorParams init_generator(const GenConfig& cfg, int H, uint64_t seed, int stage = 1);

// Deep copy; shares nothing with the source.
GeneratorParams clone(const GeneratorParams& p);

// Tape-bound view of the parameters: tracked (one leaf per parameter) for
// training, or plain constants for inference / frozen evaluation.
struct TrackedGen {
    GenConfig cfg;
    int H = 0, grid_n = 0;
    Tensor map_w1, map_b1, map_w2, map_b2;
    Tensor fourier_t; // transposed basis [2, embed_pairs], always constant
    std::vector<SynthLayer> synth;
    Tensor rgb_w, rgb_b, const_grid;
    bool has_const = false;
};

TrackedGen track(GeneratorParams& p, Tape& tape);
TrackedGen as_constant(const GeneratorParams& p);

std::map<std::string, Tensor> collect_grads(const TrackedGen& t, const Gradients& grads);
std::vector<std::pair<std::string, Tensor*>> param_refs(GeneratorParams& p);

// Mapping network F: latent z [1, z_dim] -> style vector w [1, w_dim].
Tensor mapping_forward(const TrackedGen& g, const Tensor& z);

// Random Fourier embedding of normalized coordinates [n,2]:
// row p -> concat(sin(B p), cos(B p)), defined for all real inputs.
Tensor fourier_embed(const TrackedGen& g, const Tensor& norm_coords);

// Learned-constant features for an on-lattice window (training path).
// Empty [n,0]-style absence is signalled by has_const == false upstream.
Tensor const_lookup(const TrackedGen& g, const CoordGrid& window);

// Off-lattice / out-of-range lookup at pixel coordinates: bilinear in the
// interior of the lattice, zero outside. Inference only (not differentiable).
Tensor const_lookup_at(const GeneratorParams& p, const std::vector<float>& px_row,
                       const std::vector<float>& px_col);

// Learned-constant gather indices for an on-lattice window.
std::vector<int> const_window_indices(const TrackedGen& g, const CoordGrid& window);

// Full forward over an on-lattice window -> RGB rows [side^2, 3] in (0,1),
// row-major in window order.
Tensor gen_rows(const TrackedGen& g, const Tensor& z, const CoordGrid& window);

// Same forward with the window's coordinate tensor and gather indices
// prebuilt; static-grid stages reuse them across iterations.
Tensor gen_rows_prebuilt(const TrackedGen& g, const Tensor& z, const Tensor& norm_coords,
                         const std::vector<int>* const_idx);

// Forward at arbitrary pixel coordinates (fractional and out-of-range
// allowed). Used by sampling, extrapolation and super-resolution.
std::vector<float> gen_rows_at(const GeneratorParams& p, const std::vector<float>& z,
                               const std::vector<float>& px_row, const std::vector<float>& px_col);

// Convenience: evaluate the window and lay the rows out as side x side x 3.
std::vector<float> generate_image(const GeneratorParams& p, const std::vector<float>& z,
                                  const CoordGrid& window);

// Stage transition: every network weight copied verbatim; the learned
// constant is rebuilt at the doubled lattice resolution per the strategy.
GeneratorParams transfer_weights(const GeneratorParams& prev, InitStrategy strategy, Rng& rng);

} // namespace inrpatch
