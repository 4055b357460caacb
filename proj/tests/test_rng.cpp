#include <doctest.h>

#include <cmath>
#include <vector>

#include "ulab/rng.hpp"

using namespace ulab;

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        CHECK(a.next_u64() == b.next_u64());
    }
    Rng c(42), d(43);
    bool all_equal = true;
    for (int i = 0; i < 16; ++i) {
        all_equal = all_equal && c.next_u64() == d.next_u64();
    }
    CHECK_FALSE(all_equal);
}

TEST_CASE("unit draws live in [0,1)") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal draws have unit variance within 3 sigma") {
    Rng rng(11);
    const int n = 100000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rng.next_normal();
        sum += g;
        sumsq += g * g;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    // se(mean) = 1/sqrt(n), se(var) ~ sqrt(2/n)
    CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 3.0 * std::sqrt(2.0 / static_cast<double>(n)));
}

TEST_CASE("next_below is unbiased over small ranges") {
    Rng rng(13);
    std::vector<int> counts(5, 0);
    const int n = 50000;
    for (int i = 0; i < n; ++i) {
        ++counts[static_cast<std::size_t>(rng.next_below(5))];
    }
    for (int c : counts) {
        // binomial 3-sigma band around n/5
        const double expected = n / 5.0;
        const double sigma = std::sqrt(n * 0.2 * 0.8);
        CHECK(std::abs(c - expected) < 3.0 * sigma);
    }
}

TEST_CASE("mix derives distinct substreams") {
    const std::uint64_t a = Rng::mix(1, 0);
    const std::uint64_t b = Rng::mix(1, 1);
    const std::uint64_t c = Rng::mix(2, 0);
    CHECK(a != b);
    CHECK(a != c);
    Rng ra(a), rb(b);
    bool all_equal = true;
    for (int i = 0; i < 16; ++i) {
        all_equal = all_equal && ra.next_u64() == rb.next_u64();
    }
    CHECK_FALSE(all_equal);
}

TEST_CASE("shuffle is a permutation and seed-deterministic") {
    std::vector<int> base(100);
    for (int i = 0; i < 100; ++i) {
        base[static_cast<std::size_t>(i)] = i;
    }
    auto x = base, y = base;
    Rng a(5), b(5);
    a.shuffle(x);
    b.shuffle(y);
    CHECK(x == y);
    auto sorted = x;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == base);
}
