#pragma once

#include <cstdint>
#include <string>

#include "inrpatch/generator.hpp"

namespace inrpatch {

// Binary checkpoint, little-endian throughout:
//   magic "INRP" | u32 version=1 | u32 H | u32 stage | u32 grid_n
//   u32 z_dim | u32 w_dim | u32 embed_pairs | u32 const_dim
//   u32 layers | u32 width | f32 fourier_sigma | f32 lrelu_slope
//   u32 init_strategy | u64 seed | u32 block_count
//   blocks: u16 name_len | name | u8 ndim | u32 dims[] | f32 payload[]
//   u32 crc32 over all payload bytes in file order
// Blocks are written in a fixed order: "fourier" first, then the learnable
// parameters in declaration order.
void save_checkpoint(const std::string& path, const GeneratorParams& params, uint64_t seed);

GeneratorParams load_checkpoint(const std::string& path, uint64_t* seed_out = nullptr);

} // namespace inrpatch
