// The AIMC tile: crossbar, input/output SRAM and the controller operations
// reached through the CM_* instructions.
#pragma once

#include "alpine/crossbar.hpp"
#include "alpine/qpack.hpp"

#include <chrono>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace alpine {

using Picoseconds = std::chrono::duration<std::int64_t, std::pico>;

enum class Coupling { Tight, Loose };

/// Tile-side durations. Transfers are linear in bytes.
struct TileTiming {
    Picoseconds t_mvm{100'000};                  // 100 ns
    std::int64_t bandwidth_bytes_per_s = 4'000'000'000;

    Picoseconds transferTime(std::int64_t bytes) const;
    Picoseconds queueTime(std::int64_t bytes) const { return transferTime(bytes); }
    Picoseconds dequeueTime(std::int64_t bytes) const { return transferTime(bytes); }
    Picoseconds processTime() const { return t_mvm; }
};

/// Per 32-bit word cost of reaching a memory-mapped tile over the peripheral
/// bus: frontend 3 + forward 4 + response 4 + 3 cycles of margin.
struct LooseBus {
    int penalty_cycles = 14;
    Picoseconds bus_period{1000}; // 1 GHz system bus clock
};

inline constexpr int kStatusOk = 0;
inline constexpr int kStatusFault = 1;

struct DequeueResult {
    Word32 word = 0;
    int status = kStatusOk;
    int valid = 0;
};

struct TileCounters {
    std::int64_t queues = 0;
    std::int64_t dequeues = 0;
    std::int64_t processes = 0;
    std::int64_t initializes = 0;
    std::int64_t bytes_in = 0;
    std::int64_t bytes_out = 0;
    std::int64_t faults = 0;
};

class AimcTile {
  public:
    AimcTile(int rows, int cols, TileTiming timing = {},
             NoiseModel noise = NoiseModel::none());
    explicit AimcTile(Crossbar xbar, TileTiming timing = {},
                      NoiseModel noise = NoiseModel::none());

    const Crossbar &crossbar() const { return xbar_; }
    Crossbar &crossbar() { return xbar_; }
    int rows() const { return xbar_.rows(); }
    int cols() const { return xbar_.cols(); }
    const TileTiming &timing() const { return timing_; }
    const NoiseModel &noise() const { return noise_; }
    std::span<const Q8> inputMemory() const { return input_mem_; }
    std::span<const Q8> outputMemory() const { return output_mem_; }
    const TileCounters &counters() const { return counters_; }
    Picoseconds accrued() const { return accrued_; }

    /// When false, CM_PROCESS only accrues time and leaves the output memory
    /// untouched. Used for throughput studies too large to compute exactly.
    void setFunctional(bool on) { functional_ = on; }
    bool functional() const { return functional_; }

    int cmInitialize(int row, int col, Word32 w, int count);
    int cmQueue(Word32 w, int count, int index);
    int cmProcess();
    DequeueResult cmDequeue(int count, int index);

    Picoseconds transferLatency(std::int64_t bytes, Coupling mode,
                                const LooseBus &bus = {}) const;

    /// Flat layout: rows x cols weights (row-major), rows input bytes, cols
    /// output bytes.
    std::vector<std::uint8_t> dumpState() const;
    void restoreState(std::span<const std::uint8_t> blob);

    /// Clears input/output memories and counters; weights stay resident.
    void resetRuntime();

  private:
    Crossbar xbar_;
    TileTiming timing_;
    NoiseModel noise_;
    std::mt19937_64 rng_;
    std::vector<Q8> input_mem_;
    std::vector<Q8> output_mem_;
    TileCounters counters_;
    Picoseconds accrued_{0};
    bool functional_ = true;
};

Picoseconds transferLatency(const TileTiming &timing, std::int64_t bytes,
                            Coupling mode, const LooseBus &bus = {});

} // namespace alpine
