#include "alpine/tile.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace alpine {

Picoseconds
TileTiming::transferTime(std::int64_t bytes) const
{
    if (bytes < 0)
        throw std::invalid_argument("transfer size must be non-negative");
    if (bandwidth_bytes_per_s <= 0)
        throw std::invalid_argument("tile bandwidth must be positive");
    constexpr std::int64_t kPsPerSecond = 1'000'000'000'000;
    // Bandwidths used in practice divide 1e12, which keeps this linear.
    const std::int64_t ps_per_byte = kPsPerSecond / bandwidth_bytes_per_s;
    const std::int64_t rem = kPsPerSecond % bandwidth_bytes_per_s;
    std::int64_t ps = bytes * ps_per_byte;
    if (rem != 0)
        ps += (bytes * rem + bandwidth_bytes_per_s - 1) / bandwidth_bytes_per_s;
    return Picoseconds{ps};
}

Picoseconds
transferLatency(const TileTiming &timing, std::int64_t bytes, Coupling mode,
                const LooseBus &bus)
{
    Picoseconds t = timing.transferTime(bytes);
    if (mode == Coupling::Loose) {
        const std::int64_t words = (bytes + kLanesPerWord - 1) / kLanesPerWord;
        t += words * bus.penalty_cycles * bus.bus_period;
    }
    return t;
}

AimcTile::AimcTile(int rows, int cols, TileTiming timing, NoiseModel noise)
    : AimcTile(Crossbar(rows, cols), timing, noise)
{
}

AimcTile::AimcTile(Crossbar xbar, TileTiming timing, NoiseModel noise)
    : xbar_(std::move(xbar)), timing_(timing), noise_(noise), rng_(noise.seed),
      input_mem_(xbar_.rows(), 0), output_mem_(xbar_.cols(), 0)
{
    noise_.validate();
}

int
AimcTile::cmInitialize(int row, int col, Word32 w, int count)
{
    if (count < 1 || count > kLanesPerWord || row < 0 || row >= rows() ||
        col < 0 || col + count > cols()) {
        ++counters_.faults;
        return kStatusFault;
    }
    const auto lanes = unpack4(w);
    for (int i = 0; i < count; ++i)
        xbar_.programWeight(row, col + i, lanes[i]);
    ++counters_.initializes;
    return kStatusOk;
}

int
AimcTile::cmQueue(Word32 w, int count, int index)
{
    if (count < 1 || count > kLanesPerWord || index < 0 ||
        index + count > rows()) {
        ++counters_.faults;
        return kStatusFault;
    }
    const auto lanes = unpack4(w);
    std::copy_n(lanes.begin(), count, input_mem_.begin() + index);
    ++counters_.queues;
    counters_.bytes_in += count;
    accrued_ += timing_.queueTime(count);
    return kStatusOk;
}

int
AimcTile::cmProcess()
{
    if (functional_)
        output_mem_ = xbar_.mvm(input_mem_, noise_, rng_);
    ++counters_.processes;
    accrued_ += timing_.processTime();
    return kStatusOk;
}

DequeueResult
AimcTile::cmDequeue(int count, int index)
{
    if (count < 1 || count > kLanesPerWord || index < 0 ||
        index + count > cols()) {
        ++counters_.faults;
        return {0, kStatusFault, 0};
    }
    const Word32 w = packPartial(
        std::span<const Q8>(output_mem_).subspan(index, count));
    ++counters_.dequeues;
    counters_.bytes_out += count;
    accrued_ += timing_.dequeueTime(count);
    return {w, kStatusOk, count};
}

Picoseconds
AimcTile::transferLatency(std::int64_t bytes, Coupling mode,
                          const LooseBus &bus) const
{
    return alpine::transferLatency(timing_, bytes, mode, bus);
}

std::vector<std::uint8_t>
AimcTile::dumpState() const
{
    std::vector<std::uint8_t> blob;
    blob.reserve(xbar_.weights().size() + input_mem_.size() +
                 output_mem_.size());
    auto append = [&blob](std::span<const Q8> v) {
        for (Q8 q : v)
            blob.push_back(static_cast<std::uint8_t>(q));
    };
    append(xbar_.weights());
    append(input_mem_);
    append(output_mem_);
    return blob;
}

void
AimcTile::restoreState(std::span<const std::uint8_t> blob)
{
    const std::size_t nw = static_cast<std::size_t>(rows()) * cols();
    const std::size_t expected = nw + rows() + cols();
    if (blob.size() != expected)
        throw ShapeError("tile state blob has " + std::to_string(blob.size()) +
                         " bytes, expected " + std::to_string(expected));
    std::vector<Q8> w(nw);
    std::transform(blob.begin(), blob.begin() + nw, w.begin(),
                   [](std::uint8_t b) { return static_cast<Q8>(b); });
    xbar_.programTile(0, 0, rows(), cols(), w);
    auto in = blob.subspan(nw, rows());
    auto out = blob.subspan(nw + rows(), cols());
    std::transform(in.begin(), in.end(), input_mem_.begin(),
                   [](std::uint8_t b) { return static_cast<Q8>(b); });
    std::transform(out.begin(), out.end(), output_mem_.begin(),
                   [](std::uint8_t b) { return static_cast<Q8>(b); });
}

void
AimcTile::resetRuntime()
{
    std::fill(input_mem_.begin(), input_mem_.end(), 0);
    std::fill(output_mem_.begin(), output_mem_.end(), 0);
    counters_ = {};
    accrued_ = Picoseconds{0};
    rng_.seed(noise_.seed);
}

} // namespace alpine
