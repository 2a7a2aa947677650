#include "inrpatch/discriminator.hpp"

#include <cmath>
#include <stdexcept>

namespace inrpatch {

void DiscParams::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
    for (size_t l = 0; l < conv_w.size(); ++l) {
        fn("conv." + std::to_string(l) + ".w", conv_w[l]);
        fn("conv." + std::to_string(l) + ".b", conv_b[l]);
    }
    fn("fc.w", fc_w);
    fn("fc.b", fc_b);
}

int disc_final_side(const DiscConfig& cfg) {
    int side = cfg.in_side;
    for (size_t l = 0; l < cfg.channels.size(); ++l) {
        const int eff = side + 2 * cfg.pad - cfg.kernel;
        if (eff < 0) throw std::invalid_argument("discriminator input side too small: " + std::to_string(cfg.in_side));
        side = eff / cfg.stride + 1;
    }
    return side;
}

DiscParams init_discriminator(const DiscConfig& cfg, uint64_t seed) {
    if (cfg.channels.empty()) throw std::invalid_argument("discriminator needs at least one conv layer");
    DiscParams p;
    p.cfg = cfg;
    Rng rng(mix_seed(seed, 0x646973));
    int in_ch = 3;
    for (int ch : cfg.channels) {
        const float scl = std::sqrt(2.0f / static_cast<float>(in_ch * cfg.kernel * cfg.kernel));
        Tensor w = randn({ch, in_ch, cfg.kernel, cfg.kernel}, rng);
        for (auto& v : *w.data) v *= scl;
        p.conv_w.push_back(std::move(w));
        p.conv_b.push_back(zeros({ch}));
        in_ch = ch;
    }
    const int fin = disc_final_side(cfg);
    const int fc_in = cfg.channels.back() * fin * fin;
    p.fc_w = randn({fc_in, 1}, rng);
    for (auto& v : *p.fc_w.data) v *= 1.0f / std::sqrt(static_cast<float>(fc_in));
    p.fc_b = zeros({1});
    return p;
}

DiscParams carry_over(const DiscParams& prev) {
    DiscParams p;
    p.cfg = prev.cfg;
    for (const auto& w : prev.conv_w) p.conv_w.push_back(w.clone());
    for (const auto& b : prev.conv_b) p.conv_b.push_back(b.clone());
    p.fc_w = prev.fc_w.clone();
    p.fc_b = prev.fc_b.clone();
    return p;
}

namespace {

TrackedDisc view(DiscParams& p, Tape* tape) {
    TrackedDisc d;
    d.cfg = p.cfg;
    auto bind = [&](Tensor& t) { return tape ? tape->leaf(t) : t; };
    for (auto& w : p.conv_w) d.conv_w.push_back(bind(w));
    for (auto& b : p.conv_b) d.conv_b.push_back(bind(b));
    d.fc_w = bind(p.fc_w);
    d.fc_b = bind(p.fc_b);
    return d;
}

} // namespace

TrackedDisc track(DiscParams& p, Tape& tape) { return view(p, &tape); }

TrackedDisc as_constant(const DiscParams& p) { return view(const_cast<DiscParams&>(p), nullptr); }

std::map<std::string, Tensor> collect_grads(const TrackedDisc& t, const Gradients& grads) {
    std::map<std::string, Tensor> out;
    for (size_t l = 0; l < t.conv_w.size(); ++l) {
        out["conv." + std::to_string(l) + ".w"] = grads.of(t.conv_w[l]);
        out["conv." + std::to_string(l) + ".b"] = grads.of(t.conv_b[l]);
    }
    out["fc.w"] = grads.of(t.fc_w);
    out["fc.b"] = grads.of(t.fc_b);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> param_refs(DiscParams& p) {
    std::vector<std::pair<std::string, Tensor*>> refs;
    p.for_each_param([&](const std::string& n, Tensor& t) { refs.emplace_back(n, &t); });
    return refs;
}

Tensor disc_forward(const TrackedDisc& d, const Tensor& batch) {
    if (batch.shape.size() != 4 || batch.shape[1] != 3 ||
        batch.shape[2] != d.cfg.in_side || batch.shape[3] != d.cfg.in_side)
        throw std::invalid_argument("disc_forward: expected [B,3," + std::to_string(d.cfg.in_side) + "," +
                                    std::to_string(d.cfg.in_side) + "], got " + shape_str(batch.shape));
    Tape* tape = d.fc_w.tape ? d.fc_w.tape : batch.tape;
    ScopeGuard sg(tape, Scope::Disc);
    Tensor h = batch;
    for (size_t l = 0; l < d.conv_w.size(); ++l) {
        h = conv2d(h, d.conv_w[l], d.cfg.stride, d.cfg.pad);
        h = leaky_relu(channel_bias(h, d.conv_b[l]), d.cfg.lrelu_slope);
    }
    const int fin = disc_final_side(d.cfg);
    h = reshape(h, {batch.shape[0], d.cfg.channels.back() * fin * fin});
    return add(matmul(h, d.fc_w), d.fc_b);
}

} // namespace inrpatch
