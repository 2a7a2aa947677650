#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace inrpatch {

struct ImageU8 {
    int w = 0, h = 0;
    std::vector<uint8_t> rgb; // row-major, 3 bytes per pixel
};

// 8-bit RGB PNG, color type 2, no alpha, non-interlaced. Values are
// rounded to the nearest 8-bit level; rows use filter type 0.
void write_png_rgb8(const std::string& path, const float* rgb, int w, int h);
void write_png_rgb8(const std::string& path, const ImageU8& img);

// Rejects anything but 8-bit RGB non-interlaced PNGs, naming the file.
ImageU8 read_png_rgb8(const std::string& path);

std::vector<float> to_float(const ImageU8& img); // /255 into [0,1]

} // namespace inrpatch
