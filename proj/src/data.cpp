#include "inrpatch/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "inrpatch/coords.hpp"
#include "inrpatch/png_io.hpp"

namespace inrpatch {

Dataset::Dataset(int size, std::vector<std::vector<float>> images) : size_(size), images_(std::move(images)) {
    if (size_ < 4) throw std::invalid_argument("dataset image size must be >= 4");
    if (images_.empty()) throw std::invalid_argument("dataset is empty");
    const size_t expect = static_cast<size_t>(size_) * size_ * 3;
    for (const auto& img : images_)
        if (img.size() != expect) throw std::invalid_argument("dataset image has wrong pixel count");
}

const std::vector<std::vector<float>>& Dataset::level(int n) const {
    if (n == size_) {
        auto it = levels_.find(n);
        if (it == levels_.end()) it = levels_.emplace(n, images_).first;
        return it->second;
    }
    if (n < 1 || size_ % n != 0)
        throw std::invalid_argument("dataset level " + std::to_string(n) + " does not divide size " + std::to_string(size_));
    auto it = levels_.find(n);
    if (it == levels_.end()) {
        std::vector<std::vector<float>> lv;
        lv.reserve(images_.size());
        for (const auto& img : images_) lv.push_back(box_downsample(img, size_, n));
        it = levels_.emplace(n, std::move(lv)).first;
    }
    return it->second;
}

std::vector<float> box_downsample(const std::vector<float>& img, int from, int to) {
    if (to < 1 || from % to != 0)
        throw std::invalid_argument("box_downsample: " + std::to_string(to) + " must divide " + std::to_string(from));
    const int f = from / to;
    if (f == 1) return img;
    std::vector<float> out(static_cast<size_t>(to) * to * 3);
    const double inv = 1.0 / (static_cast<double>(f) * f);
    for (int y = 0; y < to; ++y)
        for (int x = 0; x < to; ++x)
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int dy = 0; dy < f; ++dy)
                    for (int dx = 0; dx < f; ++dx)
                        acc += img[(static_cast<size_t>(y * f + dy) * from + static_cast<size_t>(x * f + dx)) * 3 + static_cast<size_t>(c)];
                out[(static_cast<size_t>(y) * to + x) * 3 + static_cast<size_t>(c)] = static_cast<float>(acc * inv);
            }
    return out;
}

namespace {

float smoothstep(float e0, float e1, float x) {
    float t = (x - e0) / (e1 - e0);
    t = t < 0.0f ? 0.0f : (t > 1.0f ? 1.0f : t);
    return t * t * (3.0f - 2.0f * t);
}

} // namespace

Dataset make_procedural(int n, int size, uint64_t seed) {
    if (n < 1) throw std::invalid_argument("make_procedural: need at least one image");
    std::vector<std::vector<float>> images;
    images.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, static_cast<uint64_t>(i)));
        // dark top color, light bottom color
        float top[3], bot[3], band[3];
        for (int c = 0; c < 3; ++c) top[c] = 0.08f + 0.25f * static_cast<float>(rng.uniform());
        for (int c = 0; c < 3; ++c) bot[c] = 0.60f + 0.32f * static_cast<float>(rng.uniform());
        for (int c = 0; c < 3; ++c) band[c] = 0.25f + 0.65f * static_cast<float>(rng.uniform());
        const float band_row = (0.38f + 0.24f * static_cast<float>(rng.uniform())) * static_cast<float>(size);
        const float band_half = (0.05f + 0.05f * static_cast<float>(rng.uniform())) * static_cast<float>(size);
        const float checker_amp = 0.02f + 0.02f * static_cast<float>(rng.uniform());
        std::vector<float> img(static_cast<size_t>(size) * size * 3);
        for (int y = 0; y < size; ++y) {
            const float t = static_cast<float>(y) / static_cast<float>(size - 1);
            const float band_w = smoothstep(band_half, band_half * 0.35f,
                                            std::fabs(static_cast<float>(y) - band_row));
            for (int x = 0; x < size; ++x) {
                const float chk = ((x / 2 + y / 2) % 2 == 0) ? checker_amp : -checker_amp;
                for (int c = 0; c < 3; ++c) {
                    float v = (1.0f - t) * top[c] + t * bot[c];
                    v = (1.0f - band_w) * v + band_w * band[c];
                    v += chk;
                    img[(static_cast<size_t>(y) * size + x) * 3 + static_cast<size_t>(c)] =
                        v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
                }
            }
        }
        images.push_back(std::move(img));
    }
    return Dataset(size, std::move(images));
}

Dataset load_folder(const std::string& path) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(path)) throw std::runtime_error("load_folder: not a directory: " + path);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(path)) {
        if (!e.is_regular_file()) continue;
        std::string name = e.path().filename().string();
        if (name.size() >= 4 && name.substr(name.size() - 4) == ".png") files.push_back(e.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("load_folder: no .png files in " + path);
    int size = -1;
    std::vector<std::vector<float>> images;
    for (const auto& f : files) {
        ImageU8 img = read_png_rgb8(f);
        if (img.w != img.h) throw std::runtime_error("load_folder: " + f + " is not square");
        if (size < 0) size = img.w;
        if (img.w != size)
            throw std::runtime_error("load_folder: " + f + " has size " + std::to_string(img.w) +
                                     ", expected " + std::to_string(size));
        images.push_back(to_float(img));
    }
    return Dataset(size, std::move(images));
}

Tensor real_patches(const Dataset& data, int N, int crop_side, int batch, Rng& rng) {
    if (batch < 1) throw std::invalid_argument("real_patches: batch must be >= 1");
    if (crop_side > N)
        throw std::invalid_argument("real_patches: crop " + std::to_string(crop_side) +
                                    " exceeds level side " + std::to_string(N));
    const auto& lv = data.level(N);
    std::vector<float> out(static_cast<size_t>(batch) * 3 * crop_side * crop_side);
    const int64_t plane = static_cast<int64_t>(crop_side) * crop_side;
    const uint64_t placements = static_cast<uint64_t>(N - crop_side + 1);
    for (int b = 0; b < batch; ++b) {
        const auto& img = lv[static_cast<size_t>(rng.below(static_cast<uint64_t>(data.count())))];
        int oy = 0, ox = 0;
        if (crop_side < N) {
            oy = static_cast<int>(rng.below(placements));
            ox = static_cast<int>(rng.below(placements));
        }
        for (int c = 0; c < 3; ++c) {
            float* dst = out.data() + (static_cast<int64_t>(b) * 3 + c) * plane;
            for (int y = 0; y < crop_side; ++y)
                for (int x = 0; x < crop_side; ++x)
                    dst[static_cast<int64_t>(y) * crop_side + x] =
                        img[(static_cast<size_t>(oy + y) * N + static_cast<size_t>(ox + x)) * 3 + static_cast<size_t>(c)];
        }
    }
    return constant({batch, 3, crop_side, crop_side}, std::move(out));
}

Tensor real_batch(const Dataset& data, int stage, int batch, Rng& rng) {
    const int H = data.size_px();
    const int N = stage_density(H, stage);
    const int crop = H / 4;
    return real_patches(data, N, crop, batch, rng);
}

} // namespace inrpatch
