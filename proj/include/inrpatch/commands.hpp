#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "inrpatch/generator.hpp"

namespace inrpatch {

// Rendering primitives behind the CLI. All latents are drawn from
// Rng(seed): sample i consumes the i-th block of z_dim normals, so the
// first sample of every command shares its z for a given seed.

// n samples at the checkpoint's native lattice, tiled into a sheet.
std::vector<float> render_samples(const GeneratorParams& g, int n, uint64_t seed,
                                  int& sheet_w, int& sheet_h);

// stride-1 lattice over [-m*H, (1+m)*H) per axis
std::vector<float> render_extrapolation(const GeneratorParams& g, double margin, uint64_t seed, int& side);

// stride-1/factor lattice over [0, H), factor in {2, 4}
std::vector<float> render_superres(const GeneratorParams& g, int factor, uint64_t seed, int& side);

// CLI entry points; return process exit codes and report errors on stderr.
int cmd_train(const std::string& config_path);
int cmd_sample(const std::string& checkpoint, int n, uint64_t seed, const std::string& out);
int cmd_extrapolate(const std::string& checkpoint, double margin, uint64_t seed, const std::string& out);
int cmd_superres(const std::string& checkpoint, int factor, uint64_t seed, const std::string& out);
int cmd_profile(const std::string& config_path, int iters);

} // namespace inrpatch
