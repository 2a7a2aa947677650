#include <CLI11.hpp>

#include <cstdlib>
#include <string>

#include "inrpatch/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"inrpatch - multi-stage patch-based training for coordinate-MLP GANs"};
    app.require_subcommand(1);

    // Kernels are sequential; the env var is honored as an upper bound.
    if (const char* t = std::getenv("INRPATCH_THREADS")) {
        const long v = std::strtol(t, nullptr, 10);
        if (v < 1) {
            std::fprintf(stderr, "INRPATCH_THREADS must be a positive integer\n");
            return 2;
        }
    }

    std::string config_path, checkpoint, out = "out.png";
    uint64_t seed = 1;
    int n = 1, factor = 2, iters = 50;
    double margin = 0.25;

    CLI::App* train = app.add_subcommand("train", "run training per a JSON config");
    train->add_option("--config", config_path, "config file")->required();

    CLI::App* sample = app.add_subcommand("sample", "render samples at native resolution");
    sample->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    sample->add_option("--n", n, "number of samples");
    sample->add_option("--seed", seed, "latent seed");
    sample->add_option("--out", out, "output PNG");

    CLI::App* extra = app.add_subcommand("extrapolate", "render beyond the training boundary");
    extra->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    extra->add_option("--margin", margin, "margin as a fraction of H per side");
    extra->add_option("--seed", seed, "latent seed");
    extra->add_option("--out", out, "output PNG");

    CLI::App* sr = app.add_subcommand("superres", "render at 2x or 4x the training resolution");
    sr->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
    sr->add_option("--factor", factor, "upsampling factor (2 or 4)");
    sr->add_option("--seed", seed, "latent seed");
    sr->add_option("--out", out, "output PNG");

    CLI::App* prof = app.add_subcommand("profile", "cost report across training modes");
    prof->add_option("--config", config_path, "config file")->required();
    prof->add_option("--iters", iters, "instrumented iterations per mode");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) return inrpatch::cmd_train(config_path);
    if (sample->parsed()) return inrpatch::cmd_sample(checkpoint, n, seed, out);
    if (extra->parsed()) return inrpatch::cmd_extrapolate(checkpoint, margin, seed, out);
    if (sr->parsed()) return inrpatch::cmd_superres(checkpoint, factor, seed, out);
    if (prof->parsed()) return inrpatch::cmd_profile(config_path, iters);
    return 2;
}
