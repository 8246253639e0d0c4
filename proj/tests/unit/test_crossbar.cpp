#include "alpine/crossbar.hpp"

#include <doctest.h>

#include <random>

using namespace alpine;

namespace {

std::vector<Q8>
randomVec(std::size_t n, std::mt19937_64 &rng)
{
    std::vector<Q8> v(n);
    for (auto &x : v)
        x = static_cast<Q8>(static_cast<int>(rng() % 256) - 128);
    return v;
}

} // namespace

TEST_SUITE("crossbar") {

TEST_CASE("programWeight writes one cell and checks bounds")
{
    Crossbar xb(4, 4);
    xb.programWeight(0, 0, 7);
    CHECK(xb.weight(0, 0) == 7);
    xb.programWeight(3, 3, -128);
    CHECK(xb.weight(3, 3) == -128);
    CHECK_THROWS_AS(xb.programWeight(4, 0, 1), IndexError);
    CHECK_THROWS_AS(xb.programWeight(0, -1, 1), IndexError);
}

TEST_CASE("programTile overwrites a block and rejects overflow")
{
    Crossbar xb(8, 8);
    std::vector<Q8> block(64);
    for (int i = 0; i < 64; ++i)
        block[i] = static_cast<Q8>(i - 32);
    xb.programTile(0, 0, 8, 8, block);
    for (int r = 0; r < 8; ++r)
        for (int c = 0; c < 8; ++c)
            CHECK(xb.weight(r, c) == block[r * 8 + c]);
    CHECK_THROWS_AS(xb.programTile(4, 4, 8, 8, block), IndexError);
    CHECK_THROWS(xb.programTile(0, 0, 4, 4, block)); // size mismatch
}

TEST_CASE("blocks side by side stay resident")
{
    // Gate block and dense block of the widest single-core LSTM tile.
    Crossbar xb(612, 1074);
    std::vector<Q8> gate(612 * 1024, 1), dense(612 * 50, -2);
    xb.programTile(0, 0, 612, 1024, gate);
    xb.programTile(0, 1024, 612, 50, dense);
    CHECK(xb.weight(611, 1023) == 1);
    CHECK(xb.weight(0, 1024) == -2);
    CHECK(xb.weight(611, 1073) == -2);
}

TEST_CASE("mvmRaw examples")
{
    Crossbar id(4, 4);
    for (int i = 0; i < 4; ++i)
        id.programWeight(i, i, 1);
    const Q8 x[] = {5, -3, 7, 0};
    CHECK(id.mvmRaw(x) == std::vector<std::int32_t>{5, -3, 7, 0});

    Crossbar zero(3, 5);
    const Q8 y[] = {9, -9, 100};
    CHECK(zero.mvmRaw(y) == std::vector<std::int32_t>(5, 0));

    Crossbar m(2, 2);
    const Q8 w[] = {1, 2, 3, 4};
    m.programTile(0, 0, 2, 2, w);
    const Q8 v[] = {10, -1};
    CHECK(m.mvmRaw(v) == std::vector<std::int32_t>{7, 16});
    const Q8 bad[] = {1, 2, 3};
    CHECK_THROWS_AS(m.mvmRaw(bad), ShapeError);
}

TEST_CASE("mvm applies the ADC shift")
{
    Crossbar id(4, 4, 0);
    for (int i = 0; i < 4; ++i)
        id.programWeight(i, i, 1);
    const Q8 x[] = {5, -3, 7, 0};
    CHECK(id.mvm(x) == std::vector<Q8>{5, -3, 7, 0});

    Crossbar m(2, 2, 1);
    const Q8 w[] = {1, 2, 3, 4};
    m.programTile(0, 0, 2, 2, w);
    const Q8 v[] = {10, -1};
    CHECK(m.mvm(v) == std::vector<Q8>{4, 8});
}

TEST_CASE("mvm equals a brute-force oracle")
{
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int rows = 1 + static_cast<int>(rng() % 40);
        const int cols = 1 + static_cast<int>(rng() % 40);
        const int shift = static_cast<int>(rng() % 10);
        Crossbar xb(rows, cols, shift);
        const auto w = randomVec(static_cast<std::size_t>(rows) * cols, rng);
        xb.programTile(0, 0, rows, cols, w);
        const auto x = randomVec(rows, rng);
        const auto y = xb.mvm(x);
        for (int c = 0; c < cols; ++c) {
            std::int64_t acc = 0;
            for (int r = 0; r < rows; ++r)
                acc += std::int64_t(x[r]) * w[r * cols + c];
            REQUIRE(y[c] == saturateAcc(static_cast<std::int32_t>(acc), shift));
        }
    }
}

TEST_CASE("default shift is ceil(log2(rows))")
{
    CHECK(defaultOutShift(1) == 0);
    CHECK(defaultOutShift(2) == 1);
    CHECK(defaultOutShift(256) == 8);
    CHECK(defaultOutShift(257) == 9);
    CHECK(Crossbar(1024, 4).outShift() == 10);
}

TEST_CASE("noise is seeded and off by default")
{
    Crossbar xb(32, 8, 0);
    std::vector<Q8> w(32 * 8, 3);
    xb.programTile(0, 0, 32, 8, w);
    std::vector<Q8> x(32, 1);
    const auto noise = NoiseModel::gaussian(0.01, 42);
    std::mt19937_64 a(noise.seed), b(noise.seed);
    CHECK(xb.mvm(x, noise, a) == xb.mvm(x, noise, b));
    std::mt19937_64 c(1);
    CHECK(xb.mvm(x, NoiseModel::none(), c) == xb.mvm(x));
    CHECK_THROWS(NoiseModel::gaussian(-1.0, 0).validate());
}

}
