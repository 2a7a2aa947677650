#include "inrpatch/generator.hpp"

#include <cmath>
#include <stdexcept>

namespace inrpatch {

InitStrategy init_strategy_from_string(const std::string& s) {
    if (s == "random") return InitStrategy::Random;
    if (s == "nearest") return InitStrategy::Nearest;
    if (s == "bilinear") return InitStrategy::Bilinear;
    if (s == "remove") return InitStrategy::Remove;
    throw std::invalid_argument("unknown init strategy: " + s);
}

std::string to_string(InitStrategy s) {
    switch (s) {
        case InitStrategy::Random: return "random";
        case InitStrategy::Nearest: return "nearest";
        case InitStrategy::Bilinear: return "bilinear";
        case InitStrategy::Remove: return "remove";
    }
    return "?";
}

void GeneratorParams::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
    fn("map.w1", map_w1);
    fn("map.b1", map_b1);
    fn("map.w2", map_w2);
    fn("map.b2", map_b2);
    for (size_t l = 0; l < synth.size(); ++l) {
        const std::string p = "synth." + std::to_string(l) + ".";
        fn(p + "w", synth[l].w);
        fn(p + "b", synth[l].b);
        fn(p + "aff_w", synth[l].aff_w);
        fn(p + "aff_b", synth[l].aff_b);
    }
    fn("rgb.w", rgb_w);
    fn("rgb.b", rgb_b);
    if (has_const()) fn("const_grid", const_grid);
}

void GeneratorParams::for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const {
    const_cast<GeneratorParams*>(this)->for_each_param(
        [&](const std::string& n, Tensor& t) { fn(n, t); });
}

namespace {

Tensor gauss(const Shape& shape, Rng& rng, float scl) {
    Tensor t = randn(shape, rng);
    if (scl != 1.0f)
        for (auto& v : *t.data) v *= scl;
    return t;
}

int layer_in_dim(const GenConfig& cfg, int layer) {
    if (layer == 0) return 2 * cfg.embed_pairs + (cfg.init != InitStrategy::Remove ? cfg.const_dim : 0);
    return cfg.width;
}

} // namespace

GeneratorParams init_generator(const GenConfig& cfg, int H, uint64_t seed, int stage) {
    if (H % 4 != 0) throw std::invalid_argument("image size must be divisible by 4, got " + std::to_string(H));
    GeneratorParams p;
    p.cfg = cfg;
    p.H = H;
    p.stage = stage;
    p.grid_n = stage_density(H, stage);
    Rng rng(mix_seed(seed, 0x67656E));
    p.map_w1 = gauss({cfg.z_dim, cfg.w_dim}, rng, 1.0f / std::sqrt(static_cast<float>(cfg.z_dim)));
    p.map_b1 = zeros({cfg.w_dim});
    p.map_w2 = gauss({cfg.w_dim, cfg.w_dim}, rng, 1.0f / std::sqrt(static_cast<float>(cfg.w_dim)));
    p.map_b2 = zeros({cfg.w_dim});
    p.fourier = gauss({cfg.embed_pairs, 2}, rng, cfg.fourier_sigma);
    p.synth.resize(static_cast<size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
        const int in = layer_in_dim(cfg, l);
        auto& lay = p.synth[static_cast<size_t>(l)];
        lay.w = gauss({in, cfg.width}, rng, std::sqrt(2.0f / static_cast<float>(in)));
        lay.b = zeros({cfg.width});
        lay.aff_w = gauss({cfg.w_dim, cfg.width}, rng, 1.0f / std::sqrt(static_cast<float>(cfg.w_dim)));
        lay.aff_b = full({cfg.width}, 1.0f); // styles start near identity
    }
    p.rgb_w = gauss({cfg.width, 3}, rng, 1.0f / std::sqrt(static_cast<float>(cfg.width)));
    p.rgb_b = zeros({3});
    if (p.has_const()) p.const_grid = gauss({p.grid_n * p.grid_n, cfg.const_dim}, rng, 1.0f);
    return p;
}

GeneratorParams clone(const GeneratorParams& src) {
    GeneratorParams p;
    p.cfg = src.cfg;
    p.H = src.H;
    p.stage = src.stage;
    p.grid_n = src.grid_n;
    p.map_w1 = src.map_w1.clone();
    p.map_b1 = src.map_b1.clone();
    p.map_w2 = src.map_w2.clone();
    p.map_b2 = src.map_b2.clone();
    p.fourier = src.fourier.clone();
    for (const auto& l : src.synth)
        p.synth.push_back({l.w.clone(), l.b.clone(), l.aff_w.clone(), l.aff_b.clone()});
    p.rgb_w = src.rgb_w.clone();
    p.rgb_b = src.rgb_b.clone();
    if (src.has_const()) p.const_grid = src.const_grid.clone();
    return p;
}

namespace {

Tensor fourier_transposed(const GeneratorParams& p) {
    const int e = p.cfg.embed_pairs;
    std::vector<float> t(static_cast<size_t>(2) * e);
    const float* src = p.fourier.ptr();
    for (int i = 0; i < e; ++i) {
        t[static_cast<size_t>(i)] = src[2 * i];          // row 0: x weights
        t[static_cast<size_t>(e + i)] = src[2 * i + 1];  // row 1: y weights
    }
    return constant({2, e}, std::move(t));
}

TrackedGen view(GeneratorParams& p, Tape* tape) {
    TrackedGen g;
    g.cfg = p.cfg;
    g.H = p.H;
    g.grid_n = p.grid_n;
    g.has_const = p.has_const();
    g.fourier_t = fourier_transposed(p);
    auto bind = [&](Tensor& t) { return tape ? tape->leaf(t) : t; };
    g.map_w1 = bind(p.map_w1);
    g.map_b1 = bind(p.map_b1);
    g.map_w2 = bind(p.map_w2);
    g.map_b2 = bind(p.map_b2);
    for (auto& l : p.synth)
        g.synth.push_back({bind(l.w), bind(l.b), bind(l.aff_w), bind(l.aff_b)});
    g.rgb_w = bind(p.rgb_w);
    g.rgb_b = bind(p.rgb_b);
    if (g.has_const) g.const_grid = bind(p.const_grid);
    return g;
}

} // namespace

TrackedGen track(GeneratorParams& p, Tape& tape) { return view(p, &tape); }

TrackedGen as_constant(const GeneratorParams& p) {
    return view(const_cast<GeneratorParams&>(p), nullptr);
}

std::map<std::string, Tensor> collect_grads(const TrackedGen& t, const Gradients& grads) {
    std::map<std::string, Tensor> out;
    out["map.w1"] = grads.of(t.map_w1);
    out["map.b1"] = grads.of(t.map_b1);
    out["map.w2"] = grads.of(t.map_w2);
    out["map.b2"] = grads.of(t.map_b2);
    for (size_t l = 0; l < t.synth.size(); ++l) {
        const std::string p = "synth." + std::to_string(l) + ".";
        out[p + "w"] = grads.of(t.synth[l].w);
        out[p + "b"] = grads.of(t.synth[l].b);
        out[p + "aff_w"] = grads.of(t.synth[l].aff_w);
        out[p + "aff_b"] = grads.of(t.synth[l].aff_b);
    }
    out["rgb.w"] = grads.of(t.rgb_w);
    out["rgb.b"] = grads.of(t.rgb_b);
    if (t.has_const) out["const_grid"] = grads.of(t.const_grid);
    return out;
}

std::vector<std::pair<std::string, Tensor*>> param_refs(GeneratorParams& p) {
    std::vector<std::pair<std::string, Tensor*>> refs;
    p.for_each_param([&](const std::string& n, Tensor& t) { refs.emplace_back(n, &t); });
    return refs;
}

Tensor mapping_forward(const TrackedGen& g, const Tensor& z) {
    if (z.shape != Shape{1, g.cfg.z_dim})
        throw std::invalid_argument("mapping_forward: z must be [1," + std::to_string(g.cfg.z_dim) +
                                    "], got " + shape_str(z.shape));
    Tape* tape = g.map_w1.tape;
    ScopeGuard sg(tape, Scope::Mapping);
    Tensor h = leaky_relu(add(matmul(z, g.map_w1), g.map_b1), g.cfg.lrelu_slope);
    return add(matmul(h, g.map_w2), g.map_b2);
}

Tensor fourier_embed(const TrackedGen& g, const Tensor& norm_coords) {
    if (norm_coords.shape.size() != 2 || norm_coords.shape[1] != 2)
        throw std::invalid_argument("fourier_embed expects [n,2] coords, got " + shape_str(norm_coords.shape));
    Tensor proj = matmul(norm_coords, g.fourier_t);
    return concat_cols({sine(proj), cosine(proj)});
}

std::vector<int> const_window_indices(const TrackedGen& g, const CoordGrid& window) {
    if (window.N != g.grid_n)
        throw std::invalid_argument("const_lookup: window density " + std::to_string(window.N) +
                                    " does not match stage lattice " + std::to_string(g.grid_n));
    auto [or_, oc_] = window.origin_units();
    std::vector<int> idx;
    idx.reserve(static_cast<size_t>(window.point_count()));
    for (int a = 0; a < window.side; ++a)
        for (int b = 0; b < window.side; ++b)
            idx.push_back((or_ + a) * g.grid_n + (oc_ + b));
    return idx;
}

Tensor const_lookup(const TrackedGen& g, const CoordGrid& window) {
    if (!g.has_const) throw std::logic_error("const_lookup: generator has no learned constant");
    return gather_rows(g.const_grid, const_window_indices(g, window));
}

Tensor const_lookup_at(const GeneratorParams& p, const std::vector<float>& px_row,
                       const std::vector<float>& px_col) {
    if (!p.has_const()) throw std::logic_error("const_lookup_at: generator has no learned constant");
    const int n = static_cast<int>(px_row.size());
    const int d = p.cfg.const_dim;
    const int N = p.grid_n;
    const float lattice_stride = static_cast<float>(p.H) / static_cast<float>(N);
    std::vector<float> out(static_cast<size_t>(n) * d, 0.0f);
    const float* table = p.const_grid.ptr();
    for (int r = 0; r < n; ++r) {
        const float ur = px_row[static_cast<size_t>(r)] / lattice_stride;
        const float uc = px_col[static_cast<size_t>(r)] / lattice_stride;
        if (ur < 0.0f || uc < 0.0f || ur > static_cast<float>(N - 1) || uc > static_cast<float>(N - 1))
            continue; // exterior -> zero vector
        int r0 = static_cast<int>(std::floor(ur));
        int c0 = static_cast<int>(std::floor(uc));
        if (r0 >= N - 1) r0 = N - 2 >= 0 ? N - 2 : 0;
        if (c0 >= N - 1) c0 = N - 2 >= 0 ? N - 2 : 0;
        const int r1 = std::min(r0 + 1, N - 1);
        const int c1 = std::min(c0 + 1, N - 1);
        const float fr = ur - static_cast<float>(r0);
        const float fc = uc - static_cast<float>(c0);
        const float w00 = (1.0f - fr) * (1.0f - fc);
        const float w01 = (1.0f - fr) * fc;
        const float w10 = fr * (1.0f - fc);
        const float w11 = fr * fc;
        float* dst = out.data() + static_cast<int64_t>(r) * d;
        const float* t00 = table + (static_cast<int64_t>(r0) * N + c0) * d;
        const float* t01 = table + (static_cast<int64_t>(r0) * N + c1) * d;
        const float* t10 = table + (static_cast<int64_t>(r1) * N + c0) * d;
        const float* t11 = table + (static_cast<int64_t>(r1) * N + c1) * d;
        for (int j = 0; j < d; ++j) dst[j] = w00 * t00[j] + w01 * t01[j] + w10 * t10[j] + w11 * t11[j];
    }
    return constant({n, d}, std::move(out));
}

namespace {

// Shared synthesis trunk: embedding/const features -> RGB rows.
Tensor synth_trunk(const TrackedGen& g, const Tensor& z, const Tensor& norm_coords,
                   const Tensor* const_feats) {
    Tensor w = mapping_forward(g, z);
    std::vector<Tensor> styles;
    {
        Tape* tape = g.map_w1.tape;
        ScopeGuard sg(tape, Scope::Mapping);
        styles.reserve(g.synth.size());
        for (const auto& l : g.synth) styles.push_back(add(matmul(w, l.aff_w), l.aff_b));
    }
    Tape* tape = g.map_w1.tape ? g.map_w1.tape : norm_coords.tape;
    ScopeGuard sg(tape, Scope::GenSynth);
    Tensor h = fourier_embed(g, norm_coords);
    if (const_feats) h = concat_cols({h, *const_feats});
    for (size_t l = 0; l < g.synth.size(); ++l) {
        Tensor pre = add(matmul(h, g.synth[l].w), g.synth[l].b);
        h = leaky_relu(mul(pre, styles[l]), g.cfg.lrelu_slope);
    }
    return sigmoid(add(matmul(h, g.rgb_w), g.rgb_b));
}

} // namespace

Tensor gen_rows(const TrackedGen& g, const Tensor& z, const CoordGrid& window) {
    Tensor coords = constant({static_cast<int>(window.point_count()), 2}, normalized_coords(window));
    if (g.has_const) {
        std::vector<int> idx = const_window_indices(g, window);
        return gen_rows_prebuilt(g, z, coords, &idx);
    }
    return gen_rows_prebuilt(g, z, coords, nullptr);
}

Tensor gen_rows_prebuilt(const TrackedGen& g, const Tensor& z, const Tensor& norm_coords,
                         const std::vector<int>* const_idx) {
    if (g.has_const) {
        if (!const_idx) throw std::logic_error("gen_rows_prebuilt: missing const indices");
        Tensor cf;
        {
            ScopeGuard sg(g.const_grid.tape, Scope::GenSynth);
            cf = gather_rows(g.const_grid, *const_idx);
        }
        return synth_trunk(g, z, norm_coords, &cf);
    }
    return synth_trunk(g, z, norm_coords, nullptr);
}

std::vector<float> gen_rows_at(const GeneratorParams& p, const std::vector<float>& z,
                               const std::vector<float>& px_row, const std::vector<float>& px_col) {
    if (px_row.size() != px_col.size())
        throw std::invalid_argument("gen_rows_at: coordinate arrays differ in length");
    if (static_cast<int>(z.size()) != p.cfg.z_dim)
        throw std::invalid_argument("gen_rows_at: z must have dim " + std::to_string(p.cfg.z_dim));
    TrackedGen g = as_constant(p);
    const int n = static_cast<int>(px_row.size());
    std::vector<float> nc(static_cast<size_t>(n) * 2);
    for (int r = 0; r < n; ++r) {
        nc[static_cast<size_t>(2 * r)] = normalize_coord(px_col[static_cast<size_t>(r)], p.H); // square: W == H
        nc[static_cast<size_t>(2 * r) + 1] = normalize_coord(px_row[static_cast<size_t>(r)], p.H);
    }
    Tensor coords = constant({n, 2}, std::move(nc));
    Tensor zt = constant({1, p.cfg.z_dim}, z);
    Tensor rgb;
    if (g.has_const) {
        Tensor cf = const_lookup_at(p, px_row, px_col);
        rgb = synth_trunk(g, zt, coords, &cf);
    } else {
        rgb = synth_trunk(g, zt, coords, nullptr);
    }
    return *rgb.data;
}

std::vector<float> generate_image(const GeneratorParams& p, const std::vector<float>& z,
                                  const CoordGrid& window) {
    std::vector<float> pr, pc;
    pr.reserve(static_cast<size_t>(window.point_count()));
    pc.reserve(static_cast<size_t>(window.point_count()));
    for (auto [r, c] : pixel_coords(window)) {
        pr.push_back(static_cast<float>(r));
        pc.push_back(static_cast<float>(c));
    }
    return gen_rows_at(p, z, pr, pc);
}

namespace {

std::vector<float> upsample2_nearest(const float* src, int n, int d) {
    const int n2 = 2 * n;
    std::vector<float> out(static_cast<size_t>(n2) * n2 * d);
    for (int r = 0; r < n2; ++r)
        for (int c = 0; c < n2; ++c) {
            const float* s = src + (static_cast<int64_t>(r / 2) * n + c / 2) * d;
            float* o = out.data() + (static_cast<int64_t>(r) * n2 + c) * d;
            std::copy(s, s + d, o);
        }
    return out;
}

std::vector<float> upsample2_bilinear(const float* src, int n, int d) {
    const int n2 = 2 * n;
    std::vector<float> out(static_cast<size_t>(n2) * n2 * d);
    for (int r = 0; r < n2; ++r) {
        // half-pixel-centre source coordinate, clamped at the borders
        const float sr = std::max(0.0f, std::min(static_cast<float>(n - 1), (static_cast<float>(r) + 0.5f) / 2.0f - 0.5f));
        const int r0 = static_cast<int>(std::floor(sr));
        const int r1 = std::min(r0 + 1, n - 1);
        const float fr = sr - static_cast<float>(r0);
        for (int c = 0; c < n2; ++c) {
            const float sc = std::max(0.0f, std::min(static_cast<float>(n - 1), (static_cast<float>(c) + 0.5f) / 2.0f - 0.5f));
            const int c0 = static_cast<int>(std::floor(sc));
            const int c1 = std::min(c0 + 1, n - 1);
            const float fc = sc - static_cast<float>(c0);
            const float* t00 = src + (static_cast<int64_t>(r0) * n + c0) * d;
            const float* t01 = src + (static_cast<int64_t>(r0) * n + c1) * d;
            const float* t10 = src + (static_cast<int64_t>(r1) * n + c0) * d;
            const float* t11 = src + (static_cast<int64_t>(r1) * n + c1) * d;
            float* o = out.data() + (static_cast<int64_t>(r) * n2 + c) * d;
            for (int j = 0; j < d; ++j)
                o[j] = (1.0f - fr) * ((1.0f - fc) * t00[j] + fc * t01[j]) + fr * ((1.0f - fc) * t10[j] + fc * t11[j]);
        }
    }
    return out;
}

} // namespace

GeneratorParams transfer_weights(const GeneratorParams& prev, InitStrategy strategy, Rng& rng) {
    if (prev.stage >= 3)
        throw std::invalid_argument("transfer_weights: no stage after 3");
    if ((prev.cfg.init == InitStrategy::Remove) != (strategy == InitStrategy::Remove))
        throw std::invalid_argument("transfer_weights: Remove strategy cannot change between stages");
    GeneratorParams next = clone(prev);
    next.stage = prev.stage + 1;
    next.grid_n = stage_density(prev.H, next.stage);
    next.cfg.init = strategy;
    if (strategy == InitStrategy::Remove) return next;

    const int n = prev.grid_n;
    const int d = prev.cfg.const_dim;
    switch (strategy) {
        case InitStrategy::Random:
            next.const_grid = randn({next.grid_n * next.grid_n, d}, rng);
            break;
        case InitStrategy::Nearest:
            next.const_grid = constant({next.grid_n * next.grid_n, d},
                                       upsample2_nearest(prev.const_grid.ptr(), n, d));
            break;
        case InitStrategy::Bilinear:
            next.const_grid = constant({next.grid_n * next.grid_n, d},
                                       upsample2_bilinear(prev.const_grid.ptr(), n, d));
            break;
        case InitStrategy::Remove:
            break;
    }
    return next;
}

} // namespace inrpatch
