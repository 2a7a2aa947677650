#include "inrpatch/commands.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>

#include "inrpatch/checkpoint.hpp"
#include "inrpatch/config.hpp"
#include "inrpatch/coords.hpp"
#include "inrpatch/data.hpp"
#include "inrpatch/png_io.hpp"
#include "inrpatch/profiler.hpp"
#include "inrpatch/trainer.hpp"

namespace inrpatch {

namespace {

std::vector<float> draw_z(int dim, Rng& rng) {
    std::vector<float> z(static_cast<size_t>(dim));
    for (auto& v : z) v = rng.normal();
    return z;
}

std::vector<float> eval_lattice(const GeneratorParams& g, const std::vector<float>& z,
                                int side, double first, double step) {
    std::vector<float> pr, pc;
    pr.reserve(static_cast<size_t>(side) * side);
    pc.reserve(static_cast<size_t>(side) * side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) {
            pr.push_back(static_cast<float>(first + step * y));
            pc.push_back(static_cast<float>(first + step * x));
        }
    return gen_rows_at(g, z, pr, pc);
}

std::shared_ptr<const Dataset> build_dataset(const RunConfig& cfg) {
    if (cfg.dataset_source == "procedural")
        return std::make_shared<const Dataset>(make_procedural(cfg.dataset_count, cfg.image_size, cfg.seed));
    auto data = std::make_shared<const Dataset>(load_folder(cfg.dataset_path));
    if (data->size_px() != cfg.image_size)
        throw std::runtime_error("dataset images are " + std::to_string(data->size_px()) +
                                 "px, config expects " + std::to_string(cfg.image_size) + "px");
    return data;
}

} // namespace

std::vector<float> render_samples(const GeneratorParams& g, int n, uint64_t seed,
                                  int& sheet_w, int& sheet_h) {
    if (n < 1) throw std::invalid_argument("sample count must be >= 1");
    const int side = g.grid_n;                       // native lattice resolution
    const double step = static_cast<double>(g.H) / g.grid_n;
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const int rows = (n + cols - 1) / cols;
    sheet_w = cols * side;
    sheet_h = rows * side;
    std::vector<float> sheet(static_cast<size_t>(sheet_w) * sheet_h * 3, 0.0f);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        std::vector<float> z = draw_z(g.cfg.z_dim, rng);
        std::vector<float> img = eval_lattice(g, z, side, 0.0, step);
        const int ty = (i / cols) * side, tx = (i % cols) * side;
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x)
                for (int c = 0; c < 3; ++c)
                    sheet[((static_cast<size_t>(ty + y) * sheet_w) + static_cast<size_t>(tx + x)) * 3 + static_cast<size_t>(c)] =
                        img[(static_cast<size_t>(y) * side + static_cast<size_t>(x)) * 3 + static_cast<size_t>(c)];
    }
    return sheet;
}

std::vector<float> render_extrapolation(const GeneratorParams& g, double margin, uint64_t seed, int& side) {
    if (margin < 0.0) throw std::invalid_argument("margin must be >= 0");
    const int H = g.H;
    side = static_cast<int>(std::lround((1.0 + 2.0 * margin) * H));
    const int offset = static_cast<int>(std::lround(margin * H));
    Rng rng(seed);
    std::vector<float> z = draw_z(g.cfg.z_dim, rng);
    return eval_lattice(g, z, side, -static_cast<double>(offset), 1.0);
}

std::vector<float> render_superres(const GeneratorParams& g, int factor, uint64_t seed, int& side) {
    if (factor != 2 && factor != 4) throw std::invalid_argument("superres factor must be 2 or 4");
    side = factor * g.H;
    Rng rng(seed);
    std::vector<float> z = draw_z(g.cfg.z_dim, rng);
    return eval_lattice(g, z, side, 0.0, 1.0 / factor);
}

int cmd_train(const std::string& config_path) {
    try {
        RunConfig cfg = load_config_file(config_path);
        auto data = build_dataset(cfg);
        Trainer trainer(cfg, data);
        trainer.run();
        std::cout << "training complete: mode=" << to_string(cfg.mode) << " out=" << cfg.out_dir << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "train: " << e.what() << "\n";
        return 1;
    }
}

int cmd_sample(const std::string& checkpoint, int n, uint64_t seed, const std::string& out) {
    try {
        GeneratorParams g = load_checkpoint(checkpoint);
        int w = 0, h = 0;
        std::vector<float> sheet = render_samples(g, n, seed, w, h);
        write_png_rgb8(out, sheet.data(), w, h);
        std::cout << "wrote " << out << " (" << w << "x" << h << ")\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "sample: " << e.what() << "\n";
        return 1;
    }
}

int cmd_extrapolate(const std::string& checkpoint, double margin, uint64_t seed, const std::string& out) {
    try {
        GeneratorParams g = load_checkpoint(checkpoint);
        int side = 0;
        std::vector<float> img = render_extrapolation(g, margin, seed, side);
        write_png_rgb8(out, img.data(), side, side);
        std::cout << "wrote " << out << " (" << side << "x" << side << ")\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "extrapolate: " << e.what() << "\n";
        return 1;
    }
}

int cmd_superres(const std::string& checkpoint, int factor, uint64_t seed, const std::string& out) {
    try {
        GeneratorParams g = load_checkpoint(checkpoint);
        int side = 0;
        std::vector<float> img = render_superres(g, factor, seed, side);
        write_png_rgb8(out, img.data(), side, side);
        std::cout << "wrote " << out << " (" << side << "x" << side << ")\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "superres: " << e.what() << "\n";
        return 1;
    }
}

int cmd_profile(const std::string& config_path, int iters) {
    try {
        RunConfig cfg = load_config_file(config_path);
        auto data = build_dataset(cfg);
        ProfileReport rep = run_profile(cfg, data, iters);
        std::cout << rep.table();
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "profile: " << e.what() << "\n";
        return 1;
    }
}

} // namespace inrpatch
