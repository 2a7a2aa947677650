#include <doctest.h>

#include <cmath>

#include "inrpatch/rng.hpp"
#include "inrpatch/tensor.hpp"

using namespace inrpatch;

TEST_CASE("randn is bitwise deterministic for a fixed seed") {
    Tensor a = randn({4}, static_cast<uint64_t>(7));
    Tensor b = randn({4}, static_cast<uint64_t>(7));
    REQUIRE(*a.data == *b.data);
    Tensor c = randn({4}, static_cast<uint64_t>(8));
    CHECK(*a.data != *c.data);
}

TEST_CASE("randn matches the standard normal law at scale") {
    Tensor x = randn({10000}, static_cast<uint64_t>(1));
    double sum = 0.0, sum2 = 0.0;
    for (float v : *x.data) {
        sum += v;
        sum2 += static_cast<double>(v) * v;
    }
    const double mean = sum / 10000.0;
    const double stddev = std::sqrt(sum2 / 10000.0 - mean * mean);
    CHECK(std::fabs(mean) < 0.05);
    CHECK(std::fabs(stddev - 1.0) < 0.05);
}

TEST_CASE("below() covers its range uniformly enough") {
    Rng rng(99);
    int counts[4] = {0, 0, 0, 0};
    for (int i = 0; i < 40000; ++i) counts[rng.below(4)]++;
    for (int c : counts) CHECK(std::fabs(c - 10000.0) < 5.0 * std::sqrt(40000.0 * 0.25 * 0.75));
}

TEST_CASE("mix_seed decorrelates tags") {
    CHECK(mix_seed(1, 0) != mix_seed(1, 1));
    CHECK(mix_seed(1, 0) != mix_seed(2, 0));
    CHECK(mix_seed(1, 0) == mix_seed(1, 0));
}

TEST_CASE("zero-sized dims are rejected") {
    CHECK_THROWS(zeros({0}));
    CHECK_THROWS(zeros({2, 0}));
    CHECK_THROWS(randn(Shape{}, static_cast<uint64_t>(1)));
}
