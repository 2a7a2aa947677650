#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "inrpatch/coords.hpp"

using namespace inrpatch;

TEST_CASE("make_grid(8,8,4) samples {0,2,4,6} per axis") {
    CoordGrid g = make_grid(8, 8, 4);
    REQUIRE(g.point_count() == 16);
    CHECK(g.stride == 2);
    std::set<int> rows, cols;
    for (auto [r, c] : pixel_coords(g)) {
        rows.insert(r);
        cols.insert(c);
    }
    CHECK(rows == std::set<int>{0, 2, 4, 6});
    CHECK(cols == std::set<int>{0, 2, 4, 6});
}

TEST_CASE("sparse stage-1 grid is 1/16 of the full grid") {
    CoordGrid g = make_grid(256, 256, 64);
    CHECK(g.point_count() == 4096);
    CHECK(g.stride == 4);
    CoordGrid full = make_grid(256, 256, 256);
    CHECK(full.point_count() / g.point_count() == 16);
}

TEST_CASE("make_grid(H,H,H) is the identity lattice") {
    CoordGrid g = make_grid(32, 32, 32);
    CHECK(g.stride == 1);
    CHECK(g.point_count() == 32 * 32);
    auto pts = pixel_coords(g);
    CHECK(pts.front() == std::pair<int, int>{0, 0});
    CHECK(pts.back() == std::pair<int, int>{31, 31});
}

TEST_CASE("make_grid validates divisibility and squareness") {
    CHECK_THROWS(make_grid(8, 8, 3));
    CHECK_THROWS(make_grid(8, 16, 4));
}

TEST_CASE("grid point counts are N^2 across the schedule") {
    for (int H : {8, 16, 32, 64, 128, 256})
        for (int N : {H / 4, H / 2, H})
            CHECK(make_grid(H, H, N).point_count() == static_cast<int64_t>(N) * N);
}

TEST_CASE("rcrop of the only placement returns the full grid") {
    Rng rng(1);
    CoordGrid g = make_grid(8, 8, 4);
    CoordGrid c = rcrop(g, 4, rng);
    CHECK(c == g);
}

TEST_CASE("rcrop output is a lattice-aligned subset of its parent grid") {
    Rng rng(2);
    CoordGrid g = make_grid(256, 256, 128);
    CoordGrid c = rcrop(g, 64, rng);
    CHECK(c.point_count() == 64 * 64);
    CHECK(c.stride == 2);
    // spans 128x128 pixels: (side-1)*stride + 1 covered inclusive
    auto pts = pixel_coords(c);
    CHECK(pts.back().first - pts.front().first == 126);
    std::set<std::pair<int, int>> parent;
    for (auto p : pixel_coords(g)) parent.insert(p);
    for (auto p : pts) CHECK(parent.count(p) == 1);
}

TEST_CASE("rcrop rejects oversized crops, requires full grids") {
    Rng rng(3);
    CoordGrid g = make_grid(8, 8, 4);
    CHECK_THROWS(rcrop(g, 5, rng));
    CoordGrid c = rcrop(g, 2, rng);
    CHECK_THROWS(rcrop(c, 2, rng));
}

TEST_CASE("rcrop origins are uniform over all placements") {
    // side 4, crop 3 -> 2x2 = 4 placements; 5-sigma binomial band per cell
    Rng rng(4);
    CoordGrid g = make_grid(8, 8, 4);
    std::map<std::pair<int, int>, int> counts;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
        CoordGrid c = rcrop(g, 3, rng);
        counts[{c.origin_r, c.origin_c}]++;
    }
    REQUIRE(counts.size() == 4);
    const double expect = draws / 4.0;
    const double sigma = std::sqrt(draws * 0.25 * 0.75);
    for (const auto& [origin, n] : counts) CHECK(std::fabs(n - expect) < 5.0 * sigma);
}

TEST_CASE("parent_window halves the side and doubles the stride in place") {
    CoordGrid w = make_grid(64, 64, 64);
    w.origin_r = 8;
    w.origin_c = 8;
    w.side = 16;
    CoordGrid p = parent_window(w);
    CHECK(p.stride == 2);
    CHECK(p.side == 8);
    CHECK(p.origin_r == 8);
    CHECK(p.origin_c == 8);
    // every parent coordinate is the even-index subsample of the window
    std::set<std::pair<int, int>> wset;
    for (auto q : pixel_coords(w)) wset.insert(q);
    for (auto q : pixel_coords(p)) CHECK(wset.count(q) == 1);
    // footprints differ only by one child stride at the far edge
    auto wpts = pixel_coords(w);
    auto ppts = pixel_coords(p);
    CHECK(wpts.front() == ppts.front());
    CHECK(wpts.back().first - ppts.back().first == w.stride);
}

TEST_CASE("parent_window of the identity grid is the half-density grid") {
    CoordGrid p = parent_window(make_grid(64, 64, 64));
    CHECK(p == make_grid(64, 64, 32));
}

TEST_CASE("parent_window twice works exactly for side = 0 mod 4") {
    CoordGrid w = make_grid(32, 32, 32);
    w.side = 12;
    CoordGrid pp = parent_window(parent_window(w));
    CHECK(pp.side == 3);
    w.side = 10; // 10/2 = 5 is odd
    CHECK_THROWS(parent_window(parent_window(w)));
    w.side = 7;
    CHECK_THROWS(parent_window(w));
}

TEST_CASE("normalize maps corners and midpoints exactly") {
    CHECK(normalize_coord(0.0f, 64) == doctest::Approx(-1.0f));
    CHECK(normalize_coord(63.0f, 64) == doctest::Approx(1.0f));
    CHECK(normalize_coord(3.0f, 7) == doctest::Approx(0.0f)); // odd axis midpoint
    // affine extension for out-of-boundary pixels
    CHECK(normalize_coord(-63.0f, 64) == doctest::Approx(-3.0f));
}

TEST_CASE("normalized_coords orders (x, y) row-major") {
    CoordGrid g = make_grid(8, 8, 2);
    auto nc = normalized_coords(g);
    REQUIRE(nc.size() == 8);
    CHECK(nc[0] == doctest::Approx(-1.0f));        // x of (0,0)
    CHECK(nc[1] == doctest::Approx(-1.0f));        // y of (0,0)
    CHECK(nc[2] == doctest::Approx(2.0f * 4 / 7 - 1)); // x of (0,4)
    CHECK(nc[3] == doctest::Approx(-1.0f));
}

TEST_CASE("stage densities follow the H/4, H/2, H schedule") {
    CHECK(stage_density(256, 1) == 64);
    CHECK(stage_density(256, 2) == 128);
    CHECK(stage_density(256, 3) == 256);
    CHECK_THROWS(stage_density(256, 4));
}

TEST_CASE("training coordinate budget equals (H/4)^2 at every stage") {
    const int H = 64;
    Rng rng(5);
    const int64_t budget = static_cast<int64_t>(H / 4) * (H / 4);
    CHECK(make_grid(H, H, H / 4).point_count() == budget);
    for (int stage : {2, 3}) {
        CoordGrid c = rcrop(make_grid(H, H, stage_density(H, stage)), H / 4, rng);
        CHECK(c.point_count() == budget);
    }
}
