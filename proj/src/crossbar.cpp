#include "alpine/crossbar.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace alpine {

NoiseModel
NoiseModel::gaussian(double sigma_rel, std::uint64_t seed)
{
    NoiseModel n{NoiseKind::Gaussian, sigma_rel, seed};
    n.validate();
    return n;
}

void
NoiseModel::validate() const
{
    if (!(sigma_rel >= 0.0) || !std::isfinite(sigma_rel))
        throw std::invalid_argument("noise sigma_rel must be finite and >= 0");
    if (kind == NoiseKind::None && sigma_rel != 0.0)
        throw std::invalid_argument("noise sigma_rel must be 0 when noise is off");
}

int
defaultOutShift(int rows)
{
    int shift = 0;
    while ((1LL << shift) < rows)
        ++shift;
    return shift;
}

Crossbar::Crossbar(int rows, int cols)
    : Crossbar(rows, cols, rows > 0 ? defaultOutShift(rows) : 0)
{
}

Crossbar::Crossbar(int rows, int cols, int out_shift)
    : rows_(rows), cols_(cols), out_shift_(0)
{
    if (rows <= 0 || cols <= 0)
        throw ShapeError("crossbar dimensions must be positive");
    setOutShift(out_shift);
    weights_.assign(static_cast<std::size_t>(rows) * cols, 0);
}

void
Crossbar::setOutShift(int shift)
{
    if (shift < 0 || shift > 31)
        throw std::invalid_argument("crossbar output shift must be in [0, 31]");
    out_shift_ = shift;
}

void
Crossbar::checkIndex(int row, int col) const
{
    if (row < 0 || row >= rows_ || col < 0 || col >= cols_)
        throw IndexError("crossbar index (" + std::to_string(row) + ", " +
                         std::to_string(col) + ") outside " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
}

Q8
Crossbar::weight(int row, int col) const
{
    checkIndex(row, col);
    return weights_[static_cast<std::size_t>(row) * cols_ + col];
}

void
Crossbar::programWeight(int row, int col, Q8 w)
{
    checkIndex(row, col);
    weights_[static_cast<std::size_t>(row) * cols_ + col] = w;
}

void
Crossbar::programTile(int row_off, int col_off, int r, int c,
                      std::span<const Q8> block)
{
    if (r <= 0 || c <= 0)
        throw ShapeError("tile block dimensions must be positive");
    if (block.size() != static_cast<std::size_t>(r) * c)
        throw ShapeError("tile block holds " + std::to_string(block.size()) +
                         " values, expected " + std::to_string(r * c));
    if (row_off < 0 || col_off < 0 || row_off + r > rows_ ||
        col_off + c > cols_)
        throw IndexError("block " + std::to_string(r) + "x" +
                         std::to_string(c) + " at (" +
                         std::to_string(row_off) + ", " +
                         std::to_string(col_off) + ") overflows " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    for (int i = 0; i < r; ++i) {
        const Q8 *src = block.data() + static_cast<std::size_t>(i) * c;
        Q8 *dst = weights_.data() +
                  static_cast<std::size_t>(row_off + i) * cols_ + col_off;
        std::copy(src, src + c, dst);
    }
}

std::vector<std::int32_t>
Crossbar::mvmRaw(std::span<const Q8> x) const
{
    if (x.size() != static_cast<std::size_t>(rows_))
        throw ShapeError("mvm input has " + std::to_string(x.size()) +
                         " elements, crossbar has " + std::to_string(rows_) +
                         " rows");
    std::vector<std::int32_t> acc(cols_, 0);
    for (int i = 0; i < rows_; ++i) {
        const std::int32_t xi = x[i];
        if (xi == 0)
            continue;
        const Q8 *w = weights_.data() + static_cast<std::size_t>(i) * cols_;
        for (int j = 0; j < cols_; ++j)
            acc[j] += xi * w[j];
    }
    return acc;
}

std::vector<Q8>
Crossbar::mvm(std::span<const Q8> x, const NoiseModel &noise,
              std::mt19937_64 &rng) const
{
    auto acc = mvmRaw(x);
    std::vector<Q8> out(cols_);
    if (noise.kind == NoiseKind::Gaussian && noise.sigma_rel > 0.0) {
        const double full_scale = static_cast<double>(rows_) * 128.0 * 128.0;
        std::normal_distribution<double> dist(0.0, noise.sigma_rel * full_scale);
        for (int j = 0; j < cols_; ++j) {
            const double noisy = static_cast<double>(acc[j]) + dist(rng);
            const double bounded = std::clamp(std::round(noisy), -2147483648.0,
                                              2147483647.0);
            out[j] = saturateAcc(static_cast<std::int32_t>(bounded), out_shift_);
        }
        return out;
    }
    for (int j = 0; j < cols_; ++j)
        out[j] = saturateAcc(acc[j], out_shift_);
    return out;
}

std::vector<Q8>
Crossbar::mvm(std::span<const Q8> x) const
{
    std::mt19937_64 unused(0);
    return mvm(x, NoiseModel::none(), unused);
}

} // namespace alpine
