// Deterministic event-driven timing model: in-order cores issuing abstract
// steps, private L1s and a shared LLC, DRAM, CM_* dispatch to per-core tiles
// and counting-semaphore channels between cores.
#pragma once

#include "alpine/isa.hpp"
#include "alpine/tile.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace alpine {

enum class Profile { LowPower, HighPower };

std::string_view profileName(Profile p); // "low_power" / "high_power"
Profile profileFromName(std::string_view name);
std::string_view couplingName(Coupling c); // "tight" / "loose"
Coupling couplingFromName(std::string_view name);

enum class SubRoi : std::uint8_t {
    InputLoad,
    AnalogQueue,
    AnalogMvm,
    AnalogDequeue,
    DigitalMvm,
    DigitalActivation,
    GateCombination,
    PoolNorm,
    Sync,
    OutputWriteback,
};
inline constexpr std::size_t kSubRoiCount = 10;

std::string_view subRoiName(SubRoi s); // "input_load", ...
std::optional<SubRoi> subRoiFromName(std::string_view name);

class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct BusLatencies {
    int frontend = 3;
    int forward = 4;
    int response = 4;
    int snoop = 4;
};

struct SystemConfig {
    Profile profile = Profile::HighPower;
    int n_cores = 8;
    int core_freq_mhz = 2300;
    int simd_lanes = 16;
    int fp32_op_cycles = 4;
    std::int64_t l1_size = 64 * 1024;
    std::int64_t llc_size = 1024 * 1024;
    int line_size = 64;
    int l1_ways = 8;
    int llc_ways = 16;
    // Load-to-use latency of one line, in core cycles.
    int l1_latency = 2;
    int llc_latency = 20;
    int dram_latency = 160;
    // Issue occupancy per line when a step streams many lines.
    int l1_line_cycles = 1;
    int llc_line_cycles = 8;
    int dram_line_cycles = 10;
    BusLatencies bus;
    Coupling coupling = Coupling::Tight;
    LooseBus loose_bus;
    TileTiming tile;
    int cm_issue_cycles = 1;
    // Active cycles charged to each channel wait and each channel signal.
    int sync_handoff_cycles = 12000;

    static SystemConfig lowPower();
    static SystemConfig highPower();
    static SystemConfig forProfile(Profile p);

    void validate() const;
    /// ceil(ps * f): cycles needed to cover a duration.
    std::int64_t cyclesFor(Picoseconds t) const;
    double cycleSeconds() const { return 1.0 / (core_freq_mhz * 1e6); }
};

/// Keys mirror the field names; `core_freq` is in GHz, `profile` selects the
/// built-in defaults that the remaining keys override.
SystemConfig configFromJson(const nlohmann::json &j);
nlohmann::json configToJson(const SystemConfig &cfg);

// ---------------------------------------------------------------- programs

struct Region {
    std::string name;
    std::int64_t size = 0;
};

struct ChannelDecl {
    std::string name;
    int initial_tokens = 0;
};

namespace step {
struct Compute {
    std::int64_t int8_ops = 0;
    std::int64_t fp32_ops = 0;
    std::int64_t scalar_ops = 0; // integer/control work, one cycle each
};
struct Mem {
    int region = 0;
    std::int64_t offset = 0;
    std::int64_t bytes = 0;
    bool write = false;
};
struct Cm {
    CmInstruction instr;
};
/// A run of Queue or Dequeue words covering [index, index + count); expands
/// to ceil(count / 4) instructions. Without a payload the queued words are
/// zero; dequeued words are discarded.
struct CmVector {
    CmOp op = CmOp::Queue;
    int index = 0;
    int count = 0;
    int slot = 0;
    std::vector<Q8> payload;
};
struct SyncWait {
    int channel = 0;
    int tokens = 1;
};
struct SyncSignal {
    std::vector<int> channels;
};
} // namespace step

using StepBody = std::variant<step::Compute, step::Mem, step::Cm,
                              step::CmVector, step::SyncWait,
                              step::SyncSignal>;

struct Step {
    StepBody body;
    SubRoi tag = SubRoi::DigitalActivation;
};

class CoreProgram {
  public:
    std::vector<Step> steps;

    void compute(SubRoi tag, std::int64_t int8_ops, std::int64_t fp32_ops = 0,
                 std::int64_t scalar_ops = 0);
    void read(SubRoi tag, int region, std::int64_t offset, std::int64_t bytes);
    void write(SubRoi tag, int region, std::int64_t offset,
               std::int64_t bytes);
    void cm(SubRoi tag, const CmInstruction &i);
    void queueVector(SubRoi tag, int index, int count,
                     std::vector<Q8> payload = {}, int slot = 0);
    void dequeueVector(SubRoi tag, int index, int count, int slot = 0);
    void wait(SubRoi tag, int channel, int tokens = 1);
    void signal(SubRoi tag, std::vector<int> channels);
};

/// Everything one simulation consumes: per-core programs, memory regions,
/// channels and the tiles with their core bindings.
struct Workload {
    std::string name;
    std::vector<CoreProgram> programs;
    std::vector<Region> regions;
    std::vector<ChannelDecl> channels;
    TileMap tiles;

    int addRegion(std::string name, std::int64_t size);
    int addChannel(std::string name, int initial_tokens = 0);
};

// ---------------------------------------------------------------- stats

struct CoreStats {
    std::int64_t active_cycles = 0;
    std::int64_t idle_cycles = 0;
    std::int64_t wfm_cycles = 0;
    std::int64_t instructions = 0;
    std::int64_t l1_hits = 0;
    std::int64_t l1_misses = 0;

    std::int64_t totalCycles() const
    {
        return active_cycles + idle_cycles + wfm_cycles;
    }
    double ipc() const;
    double idlePct() const;
    bool operator==(const CoreStats &) const = default;
};

struct TileStats {
    int rows = 0;
    int cols = 0;
    TileCounters counters;
    bool operator==(const TileStats &o) const;
};

struct SimStats {
    int core_freq_mhz = 0;
    std::int64_t wall_cycles = 0;
    std::vector<CoreStats> cores;
    std::int64_t llc_hits = 0;
    std::int64_t llc_misses = 0;
    std::int64_t llc_read_bytes = 0;
    std::int64_t llc_write_bytes = 0;
    std::int64_t dram_accesses = 0;
    std::array<std::int64_t, kSubRoiCount> subroi_cycles{};
    std::vector<TileStats> tiles;

    double wallSeconds() const;
    std::int64_t totalInstructions() const;
    std::int64_t subroi(SubRoi s) const
    {
        return subroi_cycles[static_cast<std::size_t>(s)];
    }
    bool operator==(const SimStats &) const = default;
};

/// LLC misses per instruction; throws when no instruction was executed.
double llcmpi(const SimStats &s);

nlohmann::json statsToJson(const SimStats &s);

// ---------------------------------------------------------------- caches

enum class HitLevel { L1, LLC, DRAM };

/// Set-associative LRU cache over line addresses.
class Cache {
  public:
    Cache(std::int64_t size, int line_size, int ways);

    struct Result {
        bool hit = false;
        bool evicted = false;
        bool evicted_dirty = false;
        std::uint64_t victim = 0;
    };

    /// Looks up a line and allocates it on a miss.
    Result access(std::uint64_t line, bool make_dirty);
    bool contains(std::uint64_t line) const;
    bool isDirty(std::uint64_t line) const;
    /// Drops a line; returns true when it was dirty.
    bool invalidate(std::uint64_t line);
    void clean(std::uint64_t line);

    int sets() const { return sets_; }
    int ways() const { return ways_; }

  private:
    struct Way {
        std::uint64_t tag = 0;
        std::uint64_t stamp = 0;
        bool valid = false;
        bool dirty = false;
    };
    Way *lookup(std::uint64_t line);
    const Way *lookup(std::uint64_t line) const;

    int sets_;
    int ways_;
    std::uint64_t clock_ = 0;
    std::vector<Way> ways_data_;
};

/// Private write-back L1 per core over a shared non-inclusive LLC. Writes
/// invalidate other L1 copies; a read miss pulls a dirty remote copy back
/// into the LLC first.
class MemoryHierarchy {
  public:
    explicit MemoryHierarchy(const SystemConfig &cfg);

    HitLevel accessLine(int core, std::uint64_t line, bool write,
                        SimStats &stats);
    /// Cycles for one isolated access at the given level.
    int latencyOf(HitLevel level) const;
    int occupancyOf(HitLevel level) const;

  private:
    void writebackToLlc(std::uint64_t line, SimStats &stats);

    const SystemConfig &cfg_;
    std::vector<Cache> l1_;
    Cache llc_;
};

// ---------------------------------------------------------------- engine

class DeadlockError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Runs every core program to completion. Steps are executed one at a time
/// on the runnable core with the smallest local time, ties going to the
/// lowest core id. The workload's tiles are mutated (weights stay resident,
/// counters are reset at the start).
SimStats run(Workload &w, const SystemConfig &cfg);

// ---------------------------------------------------------------- traces

/// Text form of a workload's timed behaviour: region/channel/tile headers,
/// CM_* lines in the instruction trace grammar and extension lines for the
/// other step kinds. Tile weights are not part of the trace.
std::string formatProgramTrace(const Workload &w);
Workload parseProgramTrace(std::string_view text);

} // namespace alpine
