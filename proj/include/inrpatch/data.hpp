#pragma once

#include <map>
#include <string>
#include <vector>

#include "inrpatch/rng.hpp"
#include "inrpatch/tensor.hpp"

namespace inrpatch {

// Square RGB images in [0,1], all the same size. Downsampled pyramid
// levels are cached so per-iteration batch prep is a crop, not a resample.
class Dataset {
public:
    Dataset(int size, std::vector<std::vector<float>> images);

    int size_px() const { return size_; }
    int count() const { return static_cast<int>(images_.size()); }
    const std::vector<float>& image(int i) const { return images_[static_cast<size_t>(i)]; }

    // box-downsampled copies at side n (n | size); level(size) is the original
    const std::vector<std::vector<float>>& level(int n) const;

private:
    int size_;
    std::vector<std::vector<float>> images_;
    mutable std::map<int, std::vector<std::vector<float>>> levels_;
};

// Deterministic synthetic dataset: vertical two-color gradient, one soft
// horizontal band, and a faint checker texture. Global layout is what the
// patch-only baseline cannot learn; colors and band position vary per image.
Dataset make_procedural(int n, int size, uint64_t seed);

// Reads every *.png in the folder (lexicographic order). All files must be
// decodable 8-bit RGB PNGs of one square size.
Dataset load_folder(const std::string& path);

// Exact block average from side `from` to side `to` (to | from).
std::vector<float> box_downsample(const std::vector<float>& img, int from, int to);

// Training reals for one stage: stage 1 is the whole image at the coarse
// level; stages 2-3 crop the stage-density level at a random lattice-aligned
// offset, matching the generator's rcrop distribution. Draw order per
// sample: image index, then row offset, then column offset.
// Returns [B, 3, crop_side, crop_side].
Tensor real_batch(const Dataset& data, int stage, int batch, Rng& rng);

// General form used by the baseline modes: density N, window crop_side.
Tensor real_patches(const Dataset& data, int N, int crop_side, int batch, Rng& rng);

} // namespace inrpatch
