#include "alpine/qpack.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace alpine;

TEST_SUITE("qpack") {

TEST_CASE("quantize maps through the scale and saturates")
{
    const ScaleFactor s(127);
    CHECK(quantize(0.0, s) == 0);
    CHECK(quantize(1.0, s) == 127);
    CHECK(quantize(-2.0, s) == -128);
    CHECK(quantize(0.5 / 127, s) == 1);   // half rounds away from zero
    CHECK(quantize(-0.5 / 127, s) == -1);
    CHECK_THROWS_AS(quantize(std::nan(""), s), QuantError);
    CHECK_THROWS_AS(quantize(std::numeric_limits<double>::infinity(), s),
                    QuantError);
}

TEST_CASE("scale factors must be positive and finite")
{
    CHECK_THROWS(ScaleFactor(0.0));
    CHECK_THROWS(ScaleFactor(-1.0));
    CHECK_THROWS(ScaleFactor(std::numeric_limits<double>::infinity()));
}

TEST_CASE("dequantize divides by the scale")
{
    CHECK(dequantize(127, ScaleFactor(127)) == 1.0);
    CHECK(dequantize(0, ScaleFactor(64)) == 0.0);
    CHECK(dequantize(-64, ScaleFactor(64)) == -1.0);
}

TEST_CASE("quantize inverts dequantize on every code")
{
    const ScaleFactor s(37.5);
    for (int q = kQ8Min; q <= kQ8Max; ++q)
        CHECK(quantize(dequantize(static_cast<Q8>(q), s), s) == q);
}

TEST_CASE("saturateAcc rounds half away then clamps")
{
    CHECK(saturateAcc(300, 0) == 127);
    CHECK(saturateAcc(-4096, 5) == -128);
    CHECK(saturateAcc(129, 1) == 65);
    CHECK(saturateAcc(-129, 1) == -65);
    CHECK(saturateAcc(7, 1) == 4);
    CHECK(saturateAcc(16, 1) == 8);
}

TEST_CASE("saturateAcc agrees with a floating-point oracle")
{
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::int32_t> acc(-2'000'000, 2'000'000);
    for (int k = 0; k < 20000; ++k) {
        const auto a = acc(rng);
        const int shift = static_cast<int>(rng() % 16);
        const double q = a / std::ldexp(1.0, shift);
        const double r = std::copysign(std::floor(std::abs(q) + 0.5), q);
        const double c = std::min(127.0, std::max(-128.0, r));
        REQUIRE(saturateAcc(a, shift) == static_cast<int>(c));
    }
}

TEST_CASE("pack4 byte layout")
{
    CHECK(pack4({1, 2, 3, 4}) == 0x04030201u);
    CHECK(pack4({0, 0, 0, 0}) == 0u);
    CHECK(pack4({-1, 0, 0, 0}) == 0x000000FFu);
}

TEST_CASE("pack4 and unpack4 are inverse")
{
    std::mt19937_64 rng(3);
    for (int k = 0; k < 10000; ++k) {
        const auto w = static_cast<Word32>(rng());
        REQUIRE(pack4(unpack4(w)) == w);
    }
    const std::array<Q8, 4> lanes{-128, 127, 0, -1};
    CHECK(unpack4(pack4(lanes)) == lanes);
}

TEST_CASE("packPartial zero-fills missing lanes")
{
    const Q8 two[] = {7, -3};
    CHECK(packPartial(two) == pack4({7, -3, 0, 0}));
    CHECK(packPartial(std::span<const Q8>{}) == 0u);
}

}
