// Functional model of the analog crossbar: an M x N signed 8-bit weight
// array computing integer matrix-vector products, with the ADC modelled as an
// arithmetic right shift followed by saturation to 8 bits.
#pragma once

#include "alpine/qpack.hpp"

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace alpine {

class IndexError : public std::out_of_range {
  public:
    using std::out_of_range::out_of_range;
};

class ShapeError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class NoiseKind { None, Gaussian };

/// Additive read noise on the raw accumulator. sigma_rel is relative to the
/// largest attainable accumulator magnitude, rows * 128 * 128.
struct NoiseModel {
    NoiseKind kind = NoiseKind::None;
    double sigma_rel = 0.0;
    std::uint64_t seed = 0;

    static NoiseModel none() { return {}; }
    static NoiseModel gaussian(double sigma_rel, std::uint64_t seed);
    void validate() const;
};

/// Smallest shift that maps a rows-long dot product of unit-ish values into
/// the 8-bit range: ceil(log2(rows)).
int defaultOutShift(int rows);

class Crossbar {
  public:
    Crossbar(int rows, int cols);
    Crossbar(int rows, int cols, int out_shift);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int outShift() const { return out_shift_; }
    void setOutShift(int shift);

    Q8 weight(int row, int col) const;
    std::span<const Q8> weights() const { return weights_; }

    void programWeight(int row, int col, Q8 w);
    /// Writes an R x C row-major block at (row_off, col_off).
    void programTile(int row_off, int col_off, int r, int c,
                     std::span<const Q8> block);

    /// Exact integer products; the oracle path for every other MVM.
    std::vector<std::int32_t> mvmRaw(std::span<const Q8> x) const;

    /// ADC-quantized product. `rng` is only drawn from when noise is on.
    std::vector<Q8> mvm(std::span<const Q8> x, const NoiseModel &noise,
                        std::mt19937_64 &rng) const;
    std::vector<Q8> mvm(std::span<const Q8> x) const;

  private:
    void checkIndex(int row, int col) const;

    int rows_;
    int cols_;
    int out_shift_;
    std::vector<Q8> weights_; // row-major, rows_ x cols_
};

} // namespace alpine
