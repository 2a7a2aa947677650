#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "inrpatch/rng.hpp"

namespace inrpatch {

// Regular 2-d lattice of integer pixel coordinates. The window origin is
// kept in pixel units so that parent windows (doubled stride) stay
// representable even when their origin falls between parent lattice lines.
struct CoordGrid {
    int H = 0, W = 0;   // training resolution, square
    int N = 0;          // points per axis of the full lattice this grid samples
    int stride = 0;     // H / N, pixels between lattice points
    int origin_r = 0;   // window origin, pixels
    int origin_c = 0;
    int side = 0;       // points per axis included (side <= N)

    int64_t point_count() const { return static_cast<int64_t>(side) * side; }
    bool is_full() const { return origin_r == 0 && origin_c == 0 && side == N; }

    // pixel coordinate of window slot (a, b), row-major
    std::pair<int, int> pixel(int a, int b) const {
        return {origin_r + stride * a, origin_c + stride * b};
    }

    // origin in stride units; valid only when the origin sits on this
    // grid's own lattice (always true for make_grid / rcrop results)
    std::pair<int, int> origin_units() const;

    bool operator==(const CoordGrid&) const = default;
};

// Full lattice of N x N points with spacing H/N. Requires N | H, N | W and
// H == W.
CoordGrid make_grid(int H, int W, int N);

// Contiguous random sub-window of crop_side^2 points, origin uniform over
// all (side - crop_side + 1)^2 lattice placements. Draw order: row, then
// column. Requires a full grid.
CoordGrid rcrop(const CoordGrid& grid, int crop_side, Rng& rng);

// Previous-stage-density window over the same spatial footprint: stride
// doubled, side halved, identical pixel origin. Every returned coordinate
// is the even-index subsample of the input window.
CoordGrid parent_window(const CoordGrid& grid);

// Affine map from pixel units to [-1, 1] per axis: x -> 2x/(W-1) - 1.
// Defined for all real inputs; out-of-range pixels extend linearly.
float normalize_coord(float v, int extent);

// Normalized (x, y) pairs for every grid point in row-major window order,
// where x is the column axis and y the row axis.
std::vector<float> normalized_coords(const CoordGrid& grid);

// Pixel (row, col) pairs in row-major window order.
std::vector<std::pair<int, int>> pixel_coords(const CoordGrid& grid);

// Stage schedule: grid density for stage i in {1,2,3} is H/4, H/2, H.
int stage_density(int H, int stage);

// Process-wide rcrop invocation count, for schedule instrumentation.
uint64_t rcrop_invocations();

} // namespace inrpatch
