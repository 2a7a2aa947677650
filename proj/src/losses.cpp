#include "inrpatch/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace inrpatch {

Tensor adv_loss_g(const Tensor& fake_logits) {
    return reduce_mean(softplus(scale(fake_logits, -1.0f)));
}

Tensor adv_loss_d(const Tensor& real_logits, const Tensor& fake_logits) {
    return add(reduce_mean(softplus(scale(real_logits, -1.0f))),
               reduce_mean(softplus(fake_logits)));
}

Tensor d_reg(const std::function<Tensor(const Tensor&)>& disc_fn, const Tensor& real_batch,
             float eps, Rng& rng) {
    if (eps <= 0.0f) throw std::invalid_argument("d_reg: eps must be positive");
    if (real_batch.shape.size() != 4)
        throw std::invalid_argument("d_reg expects a [B,C,H,W] batch, got " + shape_str(real_batch.shape));
    const int B = real_batch.shape[0];
    const int64_t per = real_batch.size() / B;
    std::vector<float> pert(*real_batch.data);
    for (int b = 0; b < B; ++b) {
        std::vector<float> u(static_cast<size_t>(per));
        double norm2 = 0.0;
        for (auto& v : u) {
            v = rng.normal();
            norm2 += static_cast<double>(v) * v;
        }
        const float inv = eps / static_cast<float>(std::sqrt(std::max(norm2, 1e-30)));
        float* row = pert.data() + static_cast<int64_t>(b) * per;
        for (int64_t i = 0; i < per; ++i) row[i] += inv * u[static_cast<size_t>(i)];
    }
    Tensor x0 = constant(real_batch.shape, *real_batch.data);
    Tensor x1 = constant(real_batch.shape, std::move(pert));
    Tensor diff = sub(disc_fn(x1), disc_fn(x0));
    return scale(reduce_mean(mul(diff, diff)), 1.0f / (eps * eps));
}

std::vector<float> frozen_parent_rows(const GeneratorParams& frozen_prev,
                                      const std::vector<float>& z, const CoordGrid& window) {
    CoordGrid parent = parent_window(window);
    std::vector<float> pr, pc;
    pr.reserve(static_cast<size_t>(parent.point_count()));
    pc.reserve(static_cast<size_t>(parent.point_count()));
    for (auto [r, c] : pixel_coords(parent)) {
        pr.push_back(static_cast<float>(r));
        pc.push_back(static_cast<float>(c));
    }
    return gen_rows_at(frozen_prev, z, pr, pc);
}

Tensor patch_reg(const Tensor& fake_batch, const GeneratorParams& frozen_prev,
                 const std::vector<std::vector<float>>& z_batch,
                 const std::vector<CoordGrid>& windows, bool squared) {
    if (fake_batch.shape.size() != 4 || fake_batch.shape[1] != 3)
        throw std::invalid_argument("patch_reg expects [B,3,s,s] fakes, got " + shape_str(fake_batch.shape));
    const int B = fake_batch.shape[0];
    const int side = fake_batch.shape[2];
    if (side % 2 != 0)
        throw std::invalid_argument("patch_reg: window side must be even, got " + std::to_string(side));
    if (static_cast<int>(z_batch.size()) != B || static_cast<int>(windows.size()) != B)
        throw std::invalid_argument("patch_reg: batch size mismatch between fakes, z and windows");

    const int half = side / 2;
    std::vector<float> target(static_cast<size_t>(B) * 3 * half * half);
    for (int b = 0; b < B; ++b) {
        const CoordGrid& w = windows[static_cast<size_t>(b)];
        if (w.side != side)
            throw std::invalid_argument("patch_reg: window side " + std::to_string(w.side) +
                                        " does not match fake side " + std::to_string(side));
        CoordGrid parent = parent_window(w);
        // structural alignment: pooled patch and parent window share origin and extent
        if (parent.origin_r != w.origin_r || parent.origin_c != w.origin_c || parent.side != half)
            throw std::logic_error("patch_reg: pooled/parent footprints misaligned");
        std::vector<float> rows = frozen_parent_rows(frozen_prev, z_batch[static_cast<size_t>(b)], w);
        const int64_t plane = static_cast<int64_t>(half) * half;
        for (int c = 0; c < 3; ++c) {
            float* dst = target.data() + (static_cast<int64_t>(b) * 3 + c) * plane;
            for (int64_t r = 0; r < plane; ++r) dst[r] = rows[static_cast<size_t>(r * 3 + c)];
        }
    }
    Tensor pooled = avg_pool2(fake_batch);
    Tensor tgt = constant({B, 3, half, half}, std::move(target));
    Tensor diff = sub(pooled, tgt);
    Tensor per_sample = row_sum(mul(diff, diff));
    if (!squared) per_sample = safe_sqrt(per_sample);
    return reduce_mean(per_sample);
}

} // namespace inrpatch
