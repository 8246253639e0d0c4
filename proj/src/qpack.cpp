#include "alpine/qpack.hpp"

#include <cmath>
#include <string>

namespace alpine {

ScaleFactor::ScaleFactor(double scale) : scale_(scale)
{
    if (!(scale > 0.0) || !std::isfinite(scale))
        throw QuantError("scale factor must be positive and finite, got " +
                         std::to_string(scale));
}

Q8
quantize(double x, ScaleFactor s)
{
    if (!std::isfinite(x))
        throw QuantError("cannot quantize a non-finite value");
    const double scaled = x * s.value();
    // std::round is half-away-from-zero; clamp first so the cast is defined.
    if (scaled >= kQ8Max)
        return kQ8Max;
    if (scaled <= kQ8Min)
        return kQ8Min;
    return clampQ8(static_cast<std::int64_t>(std::round(scaled)));
}

double
dequantize(Q8 q, ScaleFactor s)
{
    return static_cast<double>(q) / s.value();
}

Q8
saturateAcc(std::int32_t acc, int shift)
{
    if (shift < 0 || shift > 31)
        throw QuantError("accumulator shift must be in [0, 31]");
    if (shift == 0)
        return clampQ8(acc);
    const std::int64_t a = acc;
    const std::int64_t half = std::int64_t{1} << (shift - 1);
    const std::int64_t mag = a < 0 ? -a : a;
    const std::int64_t q = (mag + half) >> shift;
    return clampQ8(a < 0 ? -q : q);
}

Word32
pack4(const std::array<Q8, 4> &lanes)
{
    Word32 w = 0;
    for (int i = 0; i < kLanesPerWord; ++i)
        w |= static_cast<Word32>(static_cast<std::uint8_t>(lanes[i])) << (8 * i);
    return w;
}

std::array<Q8, 4>
unpack4(Word32 w)
{
    std::array<Q8, 4> lanes{};
    for (int i = 0; i < kLanesPerWord; ++i)
        lanes[i] = static_cast<Q8>(static_cast<std::uint8_t>(w >> (8 * i)));
    return lanes;
}

Word32
packPartial(std::span<const Q8> lanes)
{
    std::array<Q8, 4> buf{};
    for (std::size_t i = 0; i < lanes.size() && i < buf.size(); ++i)
        buf[i] = lanes[i];
    return pack4(buf);
}

} // namespace alpine
