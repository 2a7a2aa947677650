#include "inrpatch/coords.hpp"

#include <atomic>
#include <stdexcept>
#include <string>

namespace inrpatch {

namespace {
std::atomic<uint64_t> g_rcrop_calls{0};
}

std::pair<int, int> CoordGrid::origin_units() const {
    if (origin_r % stride != 0 || origin_c % stride != 0)
        throw std::logic_error("grid origin (" + std::to_string(origin_r) + "," + std::to_string(origin_c) +
                               ") is not on the stride-" + std::to_string(stride) + " lattice");
    return {origin_r / stride, origin_c / stride};
}

CoordGrid make_grid(int H, int W, int N) {
    if (H < 1 || W < 1 || N < 1) throw std::invalid_argument("make_grid: H, W, N must be positive");
    if (H != W) throw std::invalid_argument("make_grid: only square resolutions supported, got " +
                                            std::to_string(H) + "x" + std::to_string(W));
    if (H % N != 0 || W % N != 0)
        throw std::invalid_argument("make_grid: N=" + std::to_string(N) + " must divide H=" + std::to_string(H));
    CoordGrid g;
    g.H = H;
    g.W = W;
    g.N = N;
    g.stride = H / N;
    g.origin_r = 0;
    g.origin_c = 0;
    g.side = N;
    return g;
}

CoordGrid rcrop(const CoordGrid& grid, int crop_side, Rng& rng) {
    g_rcrop_calls.fetch_add(1, std::memory_order_relaxed);
    if (!grid.is_full()) throw std::invalid_argument("rcrop: input must be a full grid");
    if (crop_side < 1 || crop_side > grid.side)
        throw std::invalid_argument("rcrop: crop_side " + std::to_string(crop_side) +
                                    " exceeds grid side " + std::to_string(grid.side));
    const uint64_t placements = static_cast<uint64_t>(grid.side - crop_side + 1);
    CoordGrid out = grid;
    out.origin_r = grid.stride * static_cast<int>(rng.below(placements));
    out.origin_c = grid.stride * static_cast<int>(rng.below(placements));
    out.side = crop_side;
    return out;
}

CoordGrid parent_window(const CoordGrid& grid) {
    if (grid.side % 2 != 0)
        throw std::invalid_argument("parent_window: window side must be even, got " + std::to_string(grid.side));
    if (grid.N % 2 != 0)
        throw std::invalid_argument("parent_window: grid density must be even, got " + std::to_string(grid.N));
    CoordGrid out = grid;
    out.N = grid.N / 2;
    out.stride = 2 * grid.stride;
    out.side = grid.side / 2;
    return out;
}

float normalize_coord(float v, int extent) {
    return 2.0f * v / static_cast<float>(extent - 1) - 1.0f;
}

std::vector<float> normalized_coords(const CoordGrid& grid) {
    if (grid.H < 2 || grid.W < 2) throw std::invalid_argument("normalized_coords: resolution must be >= 2");
    std::vector<float> out;
    out.reserve(static_cast<size_t>(grid.point_count()) * 2);
    for (int a = 0; a < grid.side; ++a) {
        const float y = normalize_coord(static_cast<float>(grid.origin_r + grid.stride * a), grid.H);
        for (int b = 0; b < grid.side; ++b) {
            const float x = normalize_coord(static_cast<float>(grid.origin_c + grid.stride * b), grid.W);
            out.push_back(x);
            out.push_back(y);
        }
    }
    return out;
}

std::vector<std::pair<int, int>> pixel_coords(const CoordGrid& grid) {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<size_t>(grid.point_count()));
    for (int a = 0; a < grid.side; ++a)
        for (int b = 0; b < grid.side; ++b) out.emplace_back(grid.pixel(a, b));
    return out;
}

int stage_density(int H, int stage) {
    switch (stage) {
        case 1: return H / 4;
        case 2: return H / 2;
        case 3: return H;
        default: throw std::invalid_argument("stage must be in {1,2,3}, got " + std::to_string(stage));
    }
}

uint64_t rcrop_invocations() { return g_rcrop_calls.load(std::memory_order_relaxed); }

} // namespace inrpatch
