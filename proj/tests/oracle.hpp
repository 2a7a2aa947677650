#pragma once

// Test-only oracles. The gradient checker recomputes the loss from scratch
// through the forward path on perturbed parameter buffers, so it stays
// independent of the tape's backward pass.

#include <cmath>
#include <functional>

#include "inrpatch/rng.hpp"
#include "inrpatch/tensor.hpp"

namespace inrpatch::testing {

inline double fd_central(const std::function<double()>& eval, float* x, float eps) {
    const float x0 = *x;
    *x = x0 + eps;
    const double fp = eval();
    *x = x0 - eps;
    const double fm = eval();
    *x = x0;
    return (fp - fm) / (2.0 * static_cast<double>(eps));
}

struct GradCheckResult {
    int checked = 0;
    double worst = 0.0; // worst |ad - fd| / (rel*max(|ad|,|fd|) + abs); pass iff <= 1
    bool ok() const { return worst <= 1.0; }
};

// Compares AD gradients against central differences on up to max_coords
// randomly chosen coordinates of `param`. float32 forward, eps = 1e-3:
// tolerance is 1e-3 relative with a 2e-4 absolute floor for near-zero
// entries (FD noise at float precision).
inline GradCheckResult check_gradient(const std::function<double()>& eval, Tensor& param,
                                      const Tensor& grad, Rng& rng, int max_coords = 24,
                                      float eps = 1e-3f, double rel = 1e-3, double abs_floor = 2e-4) {
    GradCheckResult res;
    const int64_t n = param.size();
    for (int k = 0; k < max_coords; ++k) {
        const int64_t i = n <= max_coords ? k : static_cast<int64_t>(rng.below(static_cast<uint64_t>(n)));
        if (i >= n) break;
        const double ad = (*grad.data)[static_cast<size_t>(i)];
        const double fd = fd_central(eval, param.ptr() + i, eps);
        const double tol = rel * std::max(std::fabs(ad), std::fabs(fd)) + abs_floor;
        res.worst = std::max(res.worst, std::fabs(ad - fd) / tol);
        ++res.checked;
        if (n <= max_coords && k + 1 >= n) break;
    }
    return res;
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, float scale = 1.0f) {
    Tensor t = randn(shape, rng);
    if (scale != 1.0f)
        for (auto& v : *t.data) v *= scale;
    return t;
}

// keeps leaky-relu style tests away from the kink at 0
inline void nudge_from_zero(Tensor& t, float min_abs = 5e-2f) {
    for (auto& v : *t.data)
        if (std::fabs(v) < min_abs) v = v < 0.0f ? -min_abs : min_abs;
}

} // namespace inrpatch::testing
