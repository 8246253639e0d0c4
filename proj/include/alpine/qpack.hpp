// Signed 8-bit quantization and 4-lane packing used by all tile traffic.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace alpine {

using Q8 = std::int8_t;
using Word32 = std::uint32_t;

inline constexpr int kQ8Min = -128;
inline constexpr int kQ8Max = 127;
inline constexpr int kLanesPerWord = 4;

class QuantError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Fixed per-layer multiplier applied before quantization.
class ScaleFactor {
  public:
    explicit ScaleFactor(double scale);
    double value() const { return scale_; }

  private:
    double scale_;
};

/// clamp(round_half_away(x * s), -128, 127). Throws QuantError on non-finite x.
Q8 quantize(double x, ScaleFactor s);
double dequantize(Q8 q, ScaleFactor s);

/// Maps a wide accumulator onto the signed 8-bit ADC range.
Q8 saturateAcc(std::int32_t acc, int shift);

inline constexpr Q8
clampQ8(std::int64_t v)
{
    return static_cast<Q8>(v < kQ8Min ? kQ8Min : (v > kQ8Max ? kQ8Max : v));
}

Word32 pack4(const std::array<Q8, 4> &lanes);
std::array<Q8, 4> unpack4(Word32 w);

/// Packs up to four lanes starting at `lanes[0]`; missing lanes are zero.
Word32 packPartial(std::span<const Q8> lanes);

} // namespace alpine
