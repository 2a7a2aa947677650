#include "inrpatch/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "inrpatch/checkpoint.hpp"
#include "inrpatch/coords.hpp"
#include "inrpatch/png_io.hpp"

namespace inrpatch {

namespace {

std::string fmt(double v) {
    char b[40];
    std::snprintf(b, sizeof(b), "%.7g", v);
    return b;
}

std::vector<float> draw_z(int dim, Rng& rng) {
    std::vector<float> z(static_cast<size_t>(dim));
    for (auto& v : z) v = rng.normal();
    return z;
}

} // namespace

StageConfig multistage_config(const RunConfig& cfg, int stage) {
    StageConfig sc;
    sc.stage = stage;
    sc.N = stage_density(cfg.image_size, stage);
    sc.crop_side = cfg.crop_side();
    sc.iters = cfg.train.iters[static_cast<size_t>(stage - 1)];
    sc.batch = cfg.train.batch;
    sc.lambda_patch = stage == 1 ? 0.0f : cfg.train.lambda_patch;
    sc.d_reg_weight = cfg.train.d_reg_weight;
    sc.d_reg_every = cfg.train.d_reg_every;
    sc.d_reg_eps = cfg.train.d_reg_eps;
    sc.squared_l2 = cfg.train.squared_patch_l2;
    return sc;
}

StageConfig baseline_config(const RunConfig& cfg) {
    StageConfig sc;
    sc.stage = 0;
    sc.N = cfg.image_size;
    sc.crop_side = cfg.mode == RunMode::ImageBased ? cfg.image_size : cfg.crop_side();
    sc.iters = cfg.train.iters[0] + cfg.train.iters[1] + cfg.train.iters[2];
    sc.batch = cfg.train.batch;
    sc.lambda_patch = 0.0f;
    sc.d_reg_weight = cfg.train.d_reg_weight;
    sc.d_reg_every = cfg.train.d_reg_every;
    sc.d_reg_eps = cfg.train.d_reg_eps;
    sc.squared_l2 = cfg.train.squared_patch_l2;
    return sc;
}

std::string metrics_csv_header() {
    return "iter,stage,g_loss,d_loss,patch_loss,fwd_count,peak_floats,wall_ms\n";
}

std::string metrics_csv_row(const TrainingMetrics& m, bool record_wall_ms) {
    std::string row = std::to_string(m.iter) + "," + std::to_string(m.stage) + "," +
                      fmt(m.g_loss) + "," + fmt(m.d_loss) + "," + fmt(m.patch_loss) + "," +
                      std::to_string(m.fwd_count) + "," + std::to_string(m.peak_floats) + ",";
    row += record_wall_ms ? fmt(m.wall_ms) : std::string("0");
    row += "\n";
    return row;
}

Trainer::Trainer(RunConfig cfg, std::shared_ptr<const Dataset> data)
    : cfg_(std::move(cfg)), data_(std::move(data)) {
    cfg_.validate();
    if (data_->size_px() != cfg_.image_size)
        throw std::invalid_argument("dataset size " + std::to_string(data_->size_px()) +
                                    " does not match configured image_size " + std::to_string(cfg_.image_size));
}

std::vector<TrainingMetrics> Trainer::run_stage(const StageConfig& sc, GeneratorParams& gen,
                                                const GeneratorParams* frozen, DiscParams& disc,
                                                AdamState& adam_g, AdamState& adam_d, Rng& rng,
                                                int& global_iter, std::ostream* csv) {
    if (sc.stage == 1 && frozen) throw std::invalid_argument("stage 1 cannot have a frozen previous generator");
    if (sc.stage >= 2 && !frozen) throw std::invalid_argument("stages 2-3 require the frozen previous generator");
    if (gen.grid_n != sc.N)
        throw std::invalid_argument("generator lattice " + std::to_string(gen.grid_n) +
                                    " does not match stage density " + std::to_string(sc.N));
    if (disc.cfg.in_side != sc.crop_side)
        throw std::invalid_argument("discriminator side " + std::to_string(disc.cfg.in_side) +
                                    " does not match patch side " + std::to_string(sc.crop_side));

    data_->level(sc.N); // build the pyramid level outside the timed loop

    const int H = cfg_.image_size;
    const CoordGrid full = make_grid(H, H, sc.N);
    // static-grid fast path: coordinates and const indices never change
    Tensor cached_coords;
    std::vector<int> cached_idx;
    bool have_cached_idx = false;
    if (!sc.use_rcrop()) {
        cached_coords = constant({static_cast<int>(full.point_count()), 2}, normalized_coords(full));
        if (gen.has_const()) {
            TrackedGen gc = as_constant(gen);
            cached_idx = const_window_indices(gc, full);
            have_cached_idx = true;
        }
    }

    std::vector<TrainingMetrics> log;
    log.reserve(static_cast<size_t>(sc.iters));

    for (int it = 1; it <= sc.iters; ++it) {
        const auto t0 = std::chrono::steady_clock::now();
        tape_.clear();
        tape_.counters.reset();
        TrainingMetrics m;
        m.iter = ++global_iter;
        m.stage = sc.stage;

        // ---- D phase ----
        std::vector<std::vector<float>> z_d;
        std::vector<CoordGrid> win_d;
        for (int b = 0; b < sc.batch; ++b) {
            z_d.push_back(draw_z(cfg_.gen.z_dim, rng));
            win_d.push_back(sc.use_rcrop() ? rcrop(full, sc.crop_side, rng) : full);
        }
        std::vector<Tensor> fake_rows_d;
        {
            TrackedGen gc = as_constant(gen); // no grad into G during the D step
            for (int b = 0; b < sc.batch; ++b) {
                Tensor z = constant({1, cfg_.gen.z_dim}, z_d[static_cast<size_t>(b)]);
                if (!sc.use_rcrop())
                    fake_rows_d.push_back(gen_rows_prebuilt(gc, z, cached_coords, have_cached_idx ? &cached_idx : nullptr));
                else
                    fake_rows_d.push_back(gen_rows(gc, z, win_d[static_cast<size_t>(b)]));
            }
        }
        Tensor fakes_d = pack_patches(fake_rows_d, sc.crop_side);
        Tensor reals = real_patches(*data_, sc.N, sc.crop_side, sc.batch, rng);

        TrackedDisc td = track(disc, tape_);
        Tensor d_obj = adv_loss_d(disc_forward(td, reals), disc_forward(td, fakes_d));
        if (sc.d_reg_weight > 0.0f && it % sc.d_reg_every == 0) {
            Tensor pen = d_reg([&](const Tensor& x) { return disc_forward(td, x); }, reals, sc.d_reg_eps, rng);
            d_obj = add(d_obj, scale(pen, sc.d_reg_weight));
        }
        m.d_loss = d_obj.scalar();
        {
            Gradients grads = backward(tape_, d_obj);
            adam_step(param_refs(disc), collect_grads(td, grads), adam_d);
        }

        // ---- G phase ----
        tape_.clear();
        std::vector<std::vector<float>> z_g;
        std::vector<CoordGrid> win_g;
        for (int b = 0; b < sc.batch; ++b) {
            z_g.push_back(draw_z(cfg_.gen.z_dim, rng));
            win_g.push_back(sc.use_rcrop() ? rcrop(full, sc.crop_side, rng) : full);
        }
        TrackedGen tg = track(gen, tape_);
        TrackedDisc dc = as_constant(disc);
        std::vector<Tensor> fake_rows;
        for (int b = 0; b < sc.batch; ++b) {
            Tensor z = constant({1, cfg_.gen.z_dim}, z_g[static_cast<size_t>(b)]);
            if (!sc.use_rcrop())
                fake_rows.push_back(gen_rows_prebuilt(tg, z, cached_coords, have_cached_idx ? &cached_idx : nullptr));
            else
                fake_rows.push_back(gen_rows(tg, z, win_g[static_cast<size_t>(b)]));
        }
        Tensor fakes = pack_patches(fake_rows, sc.crop_side);
        Tensor g_adv = adv_loss_g(disc_forward(dc, fakes));
        m.g_loss = g_adv.scalar();
        Tensor g_obj = g_adv;
        if (frozen && sc.lambda_patch > 0.0f) {
            Tensor preg = patch_reg(fakes, *frozen, z_g, win_g, sc.squared_l2);
            m.patch_loss = preg.scalar();
            g_obj = add(g_adv, scale(preg, sc.lambda_patch));
        }
        {
            Gradients grads = backward(tape_, g_obj);
            adam_step(param_refs(gen), collect_grads(tg, grads), adam_g);
        }

        m.gen_fwd = tape_.counters.fwd_gen;
        m.fwd_count = tape_.counters.fwd_total();
        m.peak_floats = tape_.counters.peak_live;
        m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (csv) (*csv) << metrics_csv_row(m, cfg_.train.record_wall_ms);
        log.push_back(m);

        if (cfg_.train.sample_interval > 0 && it % cfg_.train.sample_interval == 0)
            write_sample_sheet(gen, sc.stage, m.iter);

        if (!std::isfinite(m.g_loss) || !std::isfinite(m.d_loss))
            throw std::runtime_error("non-finite loss at iteration " + std::to_string(m.iter));
    }
    tape_.clear();
    return log;
}

void Trainer::write_sample_sheet(const GeneratorParams& gen, int stage, int iter) const {
    // fixed preview latents so sheets are comparable across iterations
    Rng rng(mix_seed(cfg_.seed, 0x73616D70ull));
    const int side = gen.grid_n;
    const int cols = 2, rows = 2;
    std::vector<float> sheet(static_cast<size_t>(rows * side) * (cols * side) * 3, 0.0f);
    CoordGrid g = make_grid(gen.H, gen.H, gen.grid_n);
    for (int i = 0; i < rows * cols; ++i) {
        std::vector<float> z = draw_z(gen.cfg.z_dim, rng);
        std::vector<float> img = generate_image(gen, z, g);
        const int ty = (i / cols) * side, tx = (i % cols) * side;
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                for (int c = 0; c < 3; ++c)
                    sheet[((static_cast<size_t>(ty + y) * cols * side) + static_cast<size_t>(tx + x)) * 3 + static_cast<size_t>(c)] =
                        img[(static_cast<size_t>(y) * side + static_cast<size_t>(x)) * 3 + static_cast<size_t>(c)];
    }
    char name[96];
    std::snprintf(name, sizeof(name), "samples_stage%d_iter%06d.png", stage, iter);
    write_png_rgb8((std::filesystem::path(cfg_.out_dir) / name).string(), sheet.data(), cols * side, rows * side);
}

void Trainer::run() {
    std::filesystem::create_directories(cfg_.out_dir);
    if (cfg_.mode == RunMode::Multistage)
        run_multistage();
    else
        run_baseline();
}

void Trainer::run_multistage() {
    std::ofstream csv(std::filesystem::path(cfg_.out_dir) / "metrics.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot open metrics.csv under " + cfg_.out_dir);
    csv << metrics_csv_header();

    gen_ = init_generator(cfg_.gen, cfg_.image_size, mix_seed(cfg_.seed, 1));
    DiscConfig dc = cfg_.disc;
    dc.in_side = cfg_.crop_side();
    DiscParams disc = init_discriminator(dc, mix_seed(cfg_.seed, 2));
    Rng rng(mix_seed(cfg_.seed, 3));

    AdamState adam_g{cfg_.optim}, adam_d{cfg_.optim};
    GeneratorParams frozen;
    int global_iter = 0;
    for (int stage = 1; stage <= 3; ++stage) {
        StageConfig sc = multistage_config(cfg_, stage);
        const GeneratorParams* fz = stage >= 2 ? &frozen : nullptr;
        run_stage(sc, gen_, fz, disc, adam_g, adam_d, rng, global_iter, &csv);
        save_checkpoint((std::filesystem::path(cfg_.out_dir) / ("checkpoint_stage" + std::to_string(stage) + ".inrp")).string(),
                        gen_, cfg_.seed);
        if (stage < 3) {
            frozen = clone(gen_);
            Rng trng(mix_seed(cfg_.seed, 0x7472616Eull + static_cast<uint64_t>(stage)));
            gen_ = transfer_weights(gen_, cfg_.gen.init, trng);
            adam_g = AdamState{cfg_.optim}; // fresh moments for the re-built parameter set
            if (cfg_.train.reset_d) {
                disc = init_discriminator(dc, mix_seed(cfg_.seed, 0x64697363ull + static_cast<uint64_t>(stage)));
                adam_d = AdamState{cfg_.optim};
            }
        }
    }
}

void Trainer::run_baseline() {
    std::ofstream csv(std::filesystem::path(cfg_.out_dir) / "metrics.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot open metrics.csv under " + cfg_.out_dir);
    csv << metrics_csv_header();

    StageConfig sc = baseline_config(cfg_);
    gen_ = init_generator(cfg_.gen, cfg_.image_size, mix_seed(cfg_.seed, 1), 3);
    DiscConfig dc = cfg_.disc;
    dc.in_side = sc.crop_side;
    DiscParams disc = init_discriminator(dc, mix_seed(cfg_.seed, 2));
    Rng rng(mix_seed(cfg_.seed, 3));
    AdamState adam_g{cfg_.optim}, adam_d{cfg_.optim};
    int global_iter = 0;
    run_stage(sc, gen_, nullptr, disc, adam_g, adam_d, rng, global_iter, &csv);
    save_checkpoint((std::filesystem::path(cfg_.out_dir) / "checkpoint_final.inrp").string(), gen_, cfg_.seed);
}

} // namespace inrpatch
