#pragma once

#include <functional>
#include <vector>

#include "inrpatch/coords.hpp"
#include "inrpatch/generator.hpp"
#include "inrpatch/tensor.hpp"

namespace inrpatch {

// Non-saturating logistic GAN losses.
Tensor adv_loss_g(const Tensor& fake_logits);                            // mean softplus(-fake)
Tensor adv_loss_d(const Tensor& real_logits, const Tensor& fake_logits); // mean softplus(-real) + mean softplus(fake)

// First-order directional penalty standing in for the usual R1 gradient
// penalty (the tape is single-pass, so no double backprop): mean over the
// batch of (D(x + eps*u) - D(x))^2 / eps^2 with u a fresh random unit
// direction per sample.
Tensor d_reg(const std::function<Tensor(const Tensor&)>& disc_fn, const Tensor& real_batch,
             float eps, Rng& rng);

// Cross-stage patch regularizer: mean over the batch of the L2 norm of
// resize(I_i, 1/2) - frozen_prev(parent_window coords, same z). The resize
// is 2x2 average pooling, exactly aligned with the parent lattice.
// `squared` swaps the norm for its square (ablation option).
Tensor patch_reg(const Tensor& fake_batch, const GeneratorParams& frozen_prev,
                 const std::vector<std::vector<float>>& z_batch,
                 const std::vector<CoordGrid>& windows, bool squared = false);

// Frozen-generator target for one window: rows evaluated at the parent
// window's pixel coordinates. Exposed for the alignment tests.
std::vector<float> frozen_parent_rows(const GeneratorParams& frozen_prev,
                                      const std::vector<float>& z, const CoordGrid& window);

} // namespace inrpatch
