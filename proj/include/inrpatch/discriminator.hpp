#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "inrpatch/tensor.hpp"

namespace inrpatch {

struct DiscConfig {
    std::vector<int> channels{32, 64, 128};
    int kernel = 3;
    int stride = 2;
    int pad = 1;
    int in_side = 16; // must equal the patch side fed at every stage
    float lrelu_slope = 0.2f;

    bool operator==(const DiscConfig&) const = default;
};

// Conv stack + dense head to one logit. No normalization layers.
struct DiscParams {
    DiscConfig cfg;
    std::vector<Tensor> conv_w, conv_b;
    Tensor fc_w, fc_b;

    void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
};

// Fresh seeded init ("reset" policy at stage transitions).
DiscParams init_discriminator(const DiscConfig& cfg, uint64_t seed);

// Verbatim copy ("carry" policy at stage transitions).
DiscParams carry_over(const DiscParams& prev);

struct TrackedDisc {
    DiscConfig cfg;
    std::vector<Tensor> conv_w, conv_b;
    Tensor fc_w, fc_b;
};

TrackedDisc track(DiscParams& p, Tape& tape);
TrackedDisc as_constant(const DiscParams& p);

std::map<std::string, Tensor> collect_grads(const TrackedDisc& t, const Gradients& grads);
std::vector<std::pair<std::string, Tensor*>> param_refs(DiscParams& p);

// batch [B,3,side,side] -> logits [B,1]. Errors when side does not match.
Tensor disc_forward(const TrackedDisc& d, const Tensor& batch);

// side of the conv output after the whole stack, for the dense head
int disc_final_side(const DiscConfig& cfg);

} // namespace inrpatch
