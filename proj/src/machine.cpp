#include "alpine/machine.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

namespace alpine {

using nlohmann::json;

std::string_view
profileName(Profile p)
{
    return p == Profile::LowPower ? "low_power" : "high_power";
}

Profile
profileFromName(std::string_view name)
{
    if (name == "low_power")
        return Profile::LowPower;
    if (name == "high_power")
        return Profile::HighPower;
    throw ConfigError("unknown profile '" + std::string(name) +
                      "' (expected low_power or high_power)");
}

std::string_view
couplingName(Coupling c)
{
    return c == Coupling::Tight ? "tight" : "loose";
}

Coupling
couplingFromName(std::string_view name)
{
    if (name == "tight")
        return Coupling::Tight;
    if (name == "loose")
        return Coupling::Loose;
    throw ConfigError("unknown coupling '" + std::string(name) +
                      "' (expected tight or loose)");
}

namespace {

constexpr std::array<std::string_view, kSubRoiCount> kSubRoiNames = {
    "input_load",        "analog_queue",     "analog_mvm",
    "analog_dequeue",    "digital_mvm",      "digital_activation",
    "gate_combination",  "pool_norm",        "sync",
    "output_writeback",
};

bool
isPow2(std::int64_t v)
{
    return v > 0 && (v & (v - 1)) == 0;
}

} // namespace

std::string_view
subRoiName(SubRoi s)
{
    return kSubRoiNames[static_cast<std::size_t>(s)];
}

std::optional<SubRoi>
subRoiFromName(std::string_view name)
{
    for (std::size_t i = 0; i < kSubRoiCount; ++i)
        if (kSubRoiNames[i] == name)
            return static_cast<SubRoi>(i);
    return std::nullopt;
}

// ---------------------------------------------------------------- config

SystemConfig
SystemConfig::highPower()
{
    return SystemConfig{};
}

SystemConfig
SystemConfig::lowPower()
{
    SystemConfig c;
    c.profile = Profile::LowPower;
    c.core_freq_mhz = 800;
    c.l1_size = 32 * 1024;
    c.llc_size = 512 * 1024;
    c.llc_latency = 12;
    c.dram_latency = 60;
    c.llc_line_cycles = 6;
    c.dram_line_cycles = 8;
    return c;
}

SystemConfig
SystemConfig::forProfile(Profile p)
{
    return p == Profile::LowPower ? lowPower() : highPower();
}

void
SystemConfig::validate() const
{
    auto need = [](bool ok, const char *what) {
        if (!ok)
            throw ConfigError(what);
    };
    need(n_cores >= 1 && n_cores <= 256, "n_cores must be in [1, 256]");
    need(core_freq_mhz > 0, "core_freq must be positive");
    need(simd_lanes >= 1, "simd_lanes must be positive");
    need(fp32_op_cycles >= 0, "fp32_op_cycles must be non-negative");
    need(isPow2(line_size), "line_size must be a power of two");
    need(l1_ways >= 1 && llc_ways >= 1, "cache ways must be positive");
    need(l1_size % (static_cast<std::int64_t>(line_size) * l1_ways) == 0 &&
             isPow2(l1_size / line_size),
         "l1_size must be a power-of-two multiple of line_size * l1_ways");
    need(llc_size % (static_cast<std::int64_t>(line_size) * llc_ways) == 0 &&
             isPow2(llc_size / line_size),
         "llc_size must be a power-of-two multiple of line_size * llc_ways");
    need(l1_latency >= 0 && llc_latency >= 0 && dram_latency >= 0,
         "latencies must be non-negative");
    need(l1_line_cycles >= 1 && llc_line_cycles >= 1 && dram_line_cycles >= 1,
         "per-line cycles must be positive");
    need(bus.frontend >= 0 && bus.forward >= 0 && bus.response >= 0 &&
             bus.snoop >= 0,
         "bus latencies must be non-negative");
    need(loose_bus.penalty_cycles >= 0 && loose_bus.bus_period.count() > 0,
         "loose bus penalty must be non-negative with a positive period");
    need(tile.t_mvm.count() >= 0 && tile.bandwidth_bytes_per_s > 0,
         "tile timing must be non-negative with positive bandwidth");
    need(cm_issue_cycles >= 0, "cm_issue_cycles must be non-negative");
    need(sync_handoff_cycles >= 0, "sync_handoff_cycles must be non-negative");
}

std::int64_t
SystemConfig::cyclesFor(Picoseconds t) const
{
    // cycles = ps * MHz / 1e6, rounded up.
    const std::int64_t num = t.count() * core_freq_mhz;
    return (num + 999'999) / 1'000'000;
}

namespace {

template <typename T>
void
readKey(const json &j, const char *key, T &out)
{
    if (!j.contains(key))
        return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception &e) {
        throw ConfigError(std::string("config key '") + key + "': " +
                          e.what());
    }
}

} // namespace

SystemConfig
configFromJson(const json &j)
{
    if (!j.is_object())
        throw ConfigError("system config must be a JSON object");
    static const std::vector<std::string> kKnown = {
        "profile",         "n_cores",          "core_freq",
        "simd_lanes",      "fp32_op_cycles",   "l1_size",
        "llc_size",        "line_size",        "l1_ways",
        "llc_ways",        "l1_latency",       "llc_latency",
        "dram_latency",    "l1_line_cycles",   "llc_line_cycles",
        "dram_line_cycles", "bus",             "coupling",
        "loose_penalty_cycles", "bus_period_ps", "t_mvm_ps",
        "tile_bandwidth",  "cm_issue_cycles",  "sync_handoff_cycles",
        "energy",         "software",
    };
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(kKnown.begin(), kKnown.end(), it.key()) == kKnown.end())
            throw ConfigError("unknown config key '" + it.key() + "'");

    Profile p = Profile::HighPower;
    if (j.contains("profile"))
        p = profileFromName(j.at("profile").get<std::string>());
    SystemConfig c = SystemConfig::forProfile(p);
    readKey(j, "n_cores", c.n_cores);
    if (j.contains("core_freq")) {
        double ghz = 0;
        readKey(j, "core_freq", ghz);
        if (!(ghz > 0) || !std::isfinite(ghz))
            throw ConfigError("core_freq must be a positive GHz value");
        c.core_freq_mhz = static_cast<int>(std::llround(ghz * 1000.0));
    }
    readKey(j, "simd_lanes", c.simd_lanes);
    readKey(j, "fp32_op_cycles", c.fp32_op_cycles);
    readKey(j, "l1_size", c.l1_size);
    readKey(j, "llc_size", c.llc_size);
    readKey(j, "line_size", c.line_size);
    readKey(j, "l1_ways", c.l1_ways);
    readKey(j, "llc_ways", c.llc_ways);
    readKey(j, "l1_latency", c.l1_latency);
    readKey(j, "llc_latency", c.llc_latency);
    readKey(j, "dram_latency", c.dram_latency);
    readKey(j, "l1_line_cycles", c.l1_line_cycles);
    readKey(j, "llc_line_cycles", c.llc_line_cycles);
    readKey(j, "dram_line_cycles", c.dram_line_cycles);
    if (j.contains("bus")) {
        const auto &b = j.at("bus");
        readKey(b, "frontend", c.bus.frontend);
        readKey(b, "forward", c.bus.forward);
        readKey(b, "response", c.bus.response);
        readKey(b, "snoop", c.bus.snoop);
    }
    if (j.contains("coupling"))
        c.coupling = couplingFromName(j.at("coupling").get<std::string>());
    readKey(j, "loose_penalty_cycles", c.loose_bus.penalty_cycles);
    if (j.contains("bus_period_ps"))
        c.loose_bus.bus_period = Picoseconds{j.at("bus_period_ps").get<std::int64_t>()};
    if (j.contains("t_mvm_ps"))
        c.tile.t_mvm = Picoseconds{j.at("t_mvm_ps").get<std::int64_t>()};
    readKey(j, "tile_bandwidth", c.tile.bandwidth_bytes_per_s);
    readKey(j, "cm_issue_cycles", c.cm_issue_cycles);
    readKey(j, "sync_handoff_cycles", c.sync_handoff_cycles);
    c.validate();
    return c;
}

json
configToJson(const SystemConfig &c)
{
    return json{
        {"profile", profileName(c.profile)},
        {"n_cores", c.n_cores},
        {"core_freq", c.core_freq_mhz / 1000.0},
        {"simd_lanes", c.simd_lanes},
        {"fp32_op_cycles", c.fp32_op_cycles},
        {"l1_size", c.l1_size},
        {"llc_size", c.llc_size},
        {"line_size", c.line_size},
        {"l1_ways", c.l1_ways},
        {"llc_ways", c.llc_ways},
        {"l1_latency", c.l1_latency},
        {"llc_latency", c.llc_latency},
        {"dram_latency", c.dram_latency},
        {"l1_line_cycles", c.l1_line_cycles},
        {"llc_line_cycles", c.llc_line_cycles},
        {"dram_line_cycles", c.dram_line_cycles},
        {"bus",
         {{"frontend", c.bus.frontend},
          {"forward", c.bus.forward},
          {"response", c.bus.response},
          {"snoop", c.bus.snoop}}},
        {"coupling", couplingName(c.coupling)},
        {"loose_penalty_cycles", c.loose_bus.penalty_cycles},
        {"bus_period_ps", c.loose_bus.bus_period.count()},
        {"t_mvm_ps", c.tile.t_mvm.count()},
        {"tile_bandwidth", c.tile.bandwidth_bytes_per_s},
        {"cm_issue_cycles", c.cm_issue_cycles},
        {"sync_handoff_cycles", c.sync_handoff_cycles},
    };
}

// ---------------------------------------------------------------- programs

void
CoreProgram::compute(SubRoi tag, std::int64_t int8_ops, std::int64_t fp32_ops,
                     std::int64_t scalar_ops)
{
    if (int8_ops < 0 || fp32_ops < 0 || scalar_ops < 0)
        throw std::invalid_argument("op counts must be non-negative");
    steps.push_back({step::Compute{int8_ops, fp32_ops, scalar_ops}, tag});
}

void
CoreProgram::read(SubRoi tag, int region, std::int64_t offset,
                  std::int64_t bytes)
{
    steps.push_back({step::Mem{region, offset, bytes, false}, tag});
}

void
CoreProgram::write(SubRoi tag, int region, std::int64_t offset,
                   std::int64_t bytes)
{
    steps.push_back({step::Mem{region, offset, bytes, true}, tag});
}

void
CoreProgram::cm(SubRoi tag, const CmInstruction &i)
{
    steps.push_back({step::Cm{i}, tag});
}

void
CoreProgram::queueVector(SubRoi tag, int index, int count,
                         std::vector<Q8> payload, int slot)
{
    if (!payload.empty() && payload.size() != static_cast<std::size_t>(count))
        throw ShapeError("queue payload size does not match count");
    steps.push_back(
        {step::CmVector{CmOp::Queue, index, count, slot, std::move(payload)},
         tag});
}

void
CoreProgram::dequeueVector(SubRoi tag, int index, int count, int slot)
{
    steps.push_back({step::CmVector{CmOp::Dequeue, index, count, slot, {}}, tag});
}

void
CoreProgram::wait(SubRoi tag, int channel, int tokens)
{
    if (tokens < 1)
        throw std::invalid_argument("a wait must consume at least one token");
    steps.push_back({step::SyncWait{channel, tokens}, tag});
}

void
CoreProgram::signal(SubRoi tag, std::vector<int> channels)
{
    if (channels.empty())
        throw std::invalid_argument("a signal needs at least one channel");
    steps.push_back({step::SyncSignal{std::move(channels)}, tag});
}

int
Workload::addRegion(std::string name, std::int64_t size)
{
    if (size <= 0)
        throw std::invalid_argument("region '" + name + "' must be non-empty");
    regions.push_back({std::move(name), size});
    return static_cast<int>(regions.size()) - 1;
}

int
Workload::addChannel(std::string name, int initial_tokens)
{
    if (initial_tokens < 0)
        throw std::invalid_argument("initial tokens must be non-negative");
    channels.push_back({std::move(name), initial_tokens});
    return static_cast<int>(channels.size()) - 1;
}

// ---------------------------------------------------------------- stats

double
CoreStats::ipc() const
{
    const auto t = totalCycles();
    return t == 0 ? 0.0 : static_cast<double>(instructions) / t;
}

double
CoreStats::idlePct() const
{
    const auto t = totalCycles();
    return t == 0 ? 100.0 : 100.0 * static_cast<double>(idle_cycles) / t;
}

bool
TileStats::operator==(const TileStats &o) const
{
    const auto &a = counters;
    const auto &b = o.counters;
    return rows == o.rows && cols == o.cols && a.queues == b.queues &&
           a.dequeues == b.dequeues && a.processes == b.processes &&
           a.initializes == b.initializes && a.bytes_in == b.bytes_in &&
           a.bytes_out == b.bytes_out && a.faults == b.faults;
}

double
SimStats::wallSeconds() const
{
    return core_freq_mhz == 0
               ? 0.0
               : static_cast<double>(wall_cycles) / (core_freq_mhz * 1e6);
}

std::int64_t
SimStats::totalInstructions() const
{
    std::int64_t n = 0;
    for (const auto &c : cores)
        n += c.instructions;
    return n;
}

double
llcmpi(const SimStats &s)
{
    const auto instr = s.totalInstructions();
    if (instr <= 0)
        throw std::domain_error("LLCMPI is undefined for zero instructions");
    return static_cast<double>(s.llc_misses) / static_cast<double>(instr);
}

json
statsToJson(const SimStats &s)
{
    json cores = json::array();
    for (const auto &c : s.cores)
        cores.push_back({{"active_cycles", c.active_cycles},
                         {"idle_cycles", c.idle_cycles},
                         {"wfm_cycles", c.wfm_cycles},
                         {"instructions", c.instructions},
                         {"ipc", c.ipc()},
                         {"idle_pct", c.idlePct()},
                         {"l1_hits", c.l1_hits},
                         {"l1_misses", c.l1_misses}});
    json subroi = json::object();
    for (std::size_t i = 0; i < kSubRoiCount; ++i)
        subroi[std::string(kSubRoiNames[i])] = s.subroi_cycles[i];
    json tiles = json::array();
    for (const auto &t : s.tiles)
        tiles.push_back({{"rows", t.rows},
                         {"cols", t.cols},
                         {"queues", t.counters.queues},
                         {"dequeues", t.counters.dequeues},
                         {"processes", t.counters.processes},
                         {"initializes", t.counters.initializes},
                         {"bytes_in", t.counters.bytes_in},
                         {"bytes_out", t.counters.bytes_out},
                         {"faults", t.counters.faults}});
    const auto instr = s.totalInstructions();
    return json{
        {"core_freq_mhz", s.core_freq_mhz},
        {"wall_cycles", s.wall_cycles},
        {"wall_time_s", s.wallSeconds()},
        {"instructions", instr},
        {"llcmpi", instr > 0 ? llcmpi(s) : 0.0},
        {"cache",
         {{"llc_hits", s.llc_hits},
          {"llc_misses", s.llc_misses},
          {"llc_read_bytes", s.llc_read_bytes},
          {"llc_write_bytes", s.llc_write_bytes},
          {"dram_accesses", s.dram_accesses}}},
        {"cores", cores},
        {"subroi_cycles", subroi},
        {"tiles", tiles},
    };
}

// ---------------------------------------------------------------- caches

Cache::Cache(std::int64_t size, int line_size, int ways) : ways_(ways)
{
    if (size <= 0 || line_size <= 0 || ways <= 0 ||
        size % (static_cast<std::int64_t>(line_size) * ways) != 0)
        throw ConfigError("cache geometry is inconsistent");
    sets_ = static_cast<int>(size / line_size / ways);
    ways_data_.resize(static_cast<std::size_t>(sets_) * ways_);
}

Cache::Way *
Cache::lookup(std::uint64_t line)
{
    Way *set = &ways_data_[(line % sets_) * ways_];
    const std::uint64_t tag = line / sets_;
    for (int w = 0; w < ways_; ++w)
        if (set[w].valid && set[w].tag == tag)
            return &set[w];
    return nullptr;
}

const Cache::Way *
Cache::lookup(std::uint64_t line) const
{
    return const_cast<Cache *>(this)->lookup(line);
}

Cache::Result
Cache::access(std::uint64_t line, bool make_dirty)
{
    Result r;
    ++clock_;
    if (Way *w = lookup(line)) {
        w->stamp = clock_;
        w->dirty = w->dirty || make_dirty;
        r.hit = true;
        return r;
    }
    Way *set = &ways_data_[(line % sets_) * ways_];
    Way *victim = &set[0];
    for (int w = 0; w < ways_; ++w) {
        if (!set[w].valid) {
            victim = &set[w];
            break;
        }
        if (set[w].stamp < victim->stamp)
            victim = &set[w];
    }
    if (victim->valid) {
        r.evicted = true;
        r.evicted_dirty = victim->dirty;
        r.victim = victim->tag * sets_ + (line % sets_);
    }
    victim->valid = true;
    victim->tag = line / sets_;
    victim->dirty = make_dirty;
    victim->stamp = clock_;
    return r;
}

bool
Cache::contains(std::uint64_t line) const
{
    return lookup(line) != nullptr;
}

bool
Cache::isDirty(std::uint64_t line) const
{
    const Way *w = lookup(line);
    return w && w->dirty;
}

bool
Cache::invalidate(std::uint64_t line)
{
    Way *w = lookup(line);
    if (!w)
        return false;
    const bool dirty = w->dirty;
    w->valid = false;
    w->dirty = false;
    return dirty;
}

void
Cache::clean(std::uint64_t line)
{
    if (Way *w = lookup(line))
        w->dirty = false;
}

MemoryHierarchy::MemoryHierarchy(const SystemConfig &cfg)
    : cfg_(cfg), llc_(cfg.llc_size, cfg.line_size, cfg.llc_ways)
{
    l1_.reserve(cfg.n_cores);
    for (int c = 0; c < cfg.n_cores; ++c)
        l1_.emplace_back(cfg.l1_size, cfg.line_size, cfg.l1_ways);
}

int
MemoryHierarchy::latencyOf(HitLevel level) const
{
    switch (level) {
    case HitLevel::L1:
        return cfg_.l1_latency;
    case HitLevel::LLC:
        return cfg_.l1_latency + cfg_.llc_latency;
    case HitLevel::DRAM:
        return cfg_.l1_latency + cfg_.llc_latency + cfg_.dram_latency;
    }
    return 0;
}

int
MemoryHierarchy::occupancyOf(HitLevel level) const
{
    switch (level) {
    case HitLevel::L1:
        return cfg_.l1_line_cycles;
    case HitLevel::LLC:
        return cfg_.llc_line_cycles;
    case HitLevel::DRAM:
        return cfg_.dram_line_cycles;
    }
    return 1;
}

void
MemoryHierarchy::writebackToLlc(std::uint64_t line, SimStats &stats)
{
    stats.llc_write_bytes += cfg_.line_size;
    const auto r = llc_.access(line, true);
    if (r.evicted_dirty)
        ++stats.dram_accesses;
}

HitLevel
MemoryHierarchy::accessLine(int core, std::uint64_t line, bool write,
                            SimStats &stats)
{
    auto &cs = stats.cores[core];
    if (write) {
        for (int c = 0; c < cfg_.n_cores; ++c)
            if (c != core && l1_[c].invalidate(line))
                writebackToLlc(line, stats);
    }
    const auto r1 = l1_[core].access(line, write);
    if (r1.hit) {
        ++cs.l1_hits;
        return HitLevel::L1;
    }
    ++cs.l1_misses;
    if (r1.evicted_dirty)
        writebackToLlc(r1.victim, stats);
    if (!write) {
        for (int c = 0; c < cfg_.n_cores; ++c) {
            if (c != core && l1_[c].isDirty(line)) {
                l1_[c].clean(line);
                writebackToLlc(line, stats);
            }
        }
    }
    const auto r2 = llc_.access(line, false);
    if (r2.evicted_dirty)
        ++stats.dram_accesses;
    if (r2.hit) {
        ++stats.llc_hits;
        stats.llc_read_bytes += cfg_.line_size;
        return HitLevel::LLC;
    }
    ++stats.llc_misses;
    ++stats.dram_accesses;
    stats.llc_write_bytes += cfg_.line_size; // fill
    return HitLevel::DRAM;
}

// ---------------------------------------------------------------- engine

namespace {

constexpr std::int64_t kRegionAlign = 4096;

struct ChannelState {
    std::deque<std::int64_t> tokens;
    std::deque<int> waiters;
};

struct CoreState {
    std::size_t pc = 0;
    std::int64_t time = 0;
    bool blocked = false;
};

class Engine {
  public:
    Engine(Workload &w, const SystemConfig &cfg)
        : w_(w), cfg_(cfg), mem_(cfg), cores_(cfg.n_cores),
          channels_(w.channels.size())
    {
        cfg.validate();
        if (w.programs.size() > static_cast<std::size_t>(cfg.n_cores))
            throw ConfigError("workload '" + w.name + "' needs " +
                              std::to_string(w.programs.size()) +
                              " cores, config has " +
                              std::to_string(cfg.n_cores));
        std::int64_t base = kRegionAlign;
        for (const auto &r : w.regions) {
            bases_.push_back(base);
            base += (r.size + kRegionAlign - 1) / kRegionAlign * kRegionAlign;
        }
        for (std::size_t c = 0; c < w.channels.size(); ++c)
            channels_[c].tokens.assign(w.channels[c].initial_tokens, 0);
        stats_.core_freq_mhz = cfg.core_freq_mhz;
        stats_.cores.resize(cfg.n_cores);
        for (auto &t : w.tiles.tiles())
            t.resetRuntime();
    }

    SimStats run()
    {
        for (;;) {
            int pick = -1;
            for (int c = 0; c < static_cast<int>(w_.programs.size()); ++c) {
                if (cores_[c].blocked ||
                    cores_[c].pc >= w_.programs[c].steps.size())
                    continue;
                if (pick < 0 || cores_[c].time < cores_[pick].time)
                    pick = c;
            }
            if (pick < 0)
                break;
            stepCore(pick);
        }
        for (int c = 0; c < static_cast<int>(w_.programs.size()); ++c)
            if (cores_[c].pc < w_.programs[c].steps.size())
                throw DeadlockError(deadlockReport());
        std::int64_t wall = 0;
        for (const auto &c : cores_)
            wall = std::max(wall, c.time);
        stats_.wall_cycles = wall;
        for (int c = 0; c < cfg_.n_cores; ++c)
            stats_.cores[c].idle_cycles += wall - cores_[c].time;
        for (const auto &t : w_.tiles.tiles())
            stats_.tiles.push_back({t.rows(), t.cols(), t.counters()});
        return stats_;
    }

  private:
    void charge(int core, SubRoi tag, std::int64_t active, std::int64_t wfm,
                std::int64_t idle, std::int64_t instructions)
    {
        auto &cs = stats_.cores[core];
        cs.active_cycles += active;
        cs.wfm_cycles += wfm;
        cs.idle_cycles += idle;
        cs.instructions += instructions;
        cores_[core].time += active + wfm + idle;
        stats_.subroi_cycles[static_cast<std::size_t>(tag)] +=
            active + wfm + idle;
    }

    void execCm(int core, SubRoi tag, const CmInstruction &i)
    {
        const auto r = execute(i, core, w_.tiles, cfg_.coupling, cfg_.loose_bus);
        charge(core, tag, cfg_.cm_issue_cycles, cfg_.cyclesFor(r.latency), 0,
               1);
    }

    void stepCore(int core)
    {
        CoreState &cs = cores_[core];
        const Step &s = w_.programs[core].steps[cs.pc];
        const SubRoi tag = s.tag;
        std::visit(
            [&](const auto &b) {
                using T = std::decay_t<decltype(b)>;
                if constexpr (std::is_same_v<T, step::Compute>) {
                    const std::int64_t groups =
                        (b.int8_ops + cfg_.simd_lanes - 1) / cfg_.simd_lanes;
                    charge(core, tag,
                           groups + b.fp32_ops * cfg_.fp32_op_cycles +
                               b.scalar_ops,
                           0, 0, groups + b.fp32_ops + b.scalar_ops);
                    ++cs.pc;
                } else if constexpr (std::is_same_v<T, step::Mem>) {
                    execMem(core, tag, b);
                    ++cs.pc;
                } else if constexpr (std::is_same_v<T, step::Cm>) {
                    execCm(core, tag, b.instr);
                    ++cs.pc;
                } else if constexpr (std::is_same_v<T, step::CmVector>) {
                    execVector(core, tag, b);
                    ++cs.pc;
                } else if constexpr (std::is_same_v<T, step::SyncWait>) {
                    execWait(core, tag, b);
                } else {
                    execSignal(core, tag, b);
                    ++cs.pc;
                }
            },
            s.body);
    }

    void execMem(int core, SubRoi tag, const step::Mem &m)
    {
        if (m.region < 0 || m.region >= static_cast<int>(w_.regions.size()))
            throw MachineFault("memory step on unknown region " +
                               std::to_string(m.region));
        const auto &r = w_.regions[m.region];
        if (m.bytes <= 0 || m.offset < 0 || m.offset + m.bytes > r.size)
            throw MachineFault("memory step outside region '" + r.name + "'");
        const std::uint64_t line_size = cfg_.line_size;
        const std::uint64_t first = (bases_[m.region] + m.offset) / line_size;
        const std::uint64_t last =
            (bases_[m.region] + m.offset + m.bytes - 1) / line_size;
        std::int64_t occupancy = 0;
        std::int64_t tail = 0;
        for (std::uint64_t line = first; line <= last; ++line) {
            const HitLevel lvl = mem_.accessLine(core, line, m.write, stats_);
            const int occ = mem_.occupancyOf(lvl);
            occupancy += occ;
            tail = std::max<std::int64_t>(tail, mem_.latencyOf(lvl) - occ);
        }
        const auto lines = static_cast<std::int64_t>(last - first + 1);
        charge(core, tag, 0, occupancy + tail, 0, lines);
    }

    void execVector(int core, SubRoi tag, const step::CmVector &v)
    {
        if (v.count < 0)
            throw MachineFault("negative vector length");
        const std::uint32_t slot_bits = static_cast<std::uint32_t>(v.slot) << 24;
        for (int off = 0; off < v.count; off += kLanesPerWord) {
            const int n = std::min(kLanesPerWord, v.count - off);
            const auto rn = static_cast<std::uint32_t>(v.index + off) | slot_bits;
            CmInstruction i;
            if (v.op == CmOp::Queue) {
                Word32 word = 0;
                if (!v.payload.empty())
                    word = packPartial(std::span<const Q8>(v.payload)
                                           .subspan(off, n));
                i = CmInstruction::queue(word, n, 0);
            } else {
                i = CmInstruction::dequeue(n, 0);
            }
            i.rn = rn;
            execCm(core, tag, i);
        }
    }

    void execWait(int core, SubRoi tag, const step::SyncWait &sw)
    {
        if (sw.channel < 0 || sw.channel >= static_cast<int>(channels_.size()))
            throw MachineFault("wait on unknown channel " +
                               std::to_string(sw.channel));
        auto &ch = channels_[sw.channel];
        CoreState &cs = cores_[core];
        const bool first = ch.waiters.empty() || ch.waiters.front() == core;
        if (!first || static_cast<int>(ch.tokens.size()) < sw.tokens) {
            if (std::find(ch.waiters.begin(), ch.waiters.end(), core) ==
                ch.waiters.end())
                ch.waiters.push_back(core);
            cs.blocked = true;
            return;
        }
        if (!ch.waiters.empty())
            ch.waiters.pop_front();
        std::int64_t ready = cs.time;
        for (int k = 0; k < sw.tokens; ++k) {
            ready = std::max(ready, ch.tokens.front());
            ch.tokens.pop_front();
        }
        charge(core, tag, 0, 0, ready - cs.time, 0);
        charge(core, tag, cfg_.sync_handoff_cycles, 0, 0, 1);
        ++cs.pc;
        if (!ch.waiters.empty())
            cores_[ch.waiters.front()].blocked = false;
    }

    void execSignal(int core, SubRoi tag, const step::SyncSignal &sg)
    {
        charge(core, tag, cfg_.sync_handoff_cycles, 0, 0, 1);
        const std::int64_t t = cores_[core].time;
        for (int ch : sg.channels) {
            if (ch < 0 || ch >= static_cast<int>(channels_.size()))
                throw MachineFault("signal on unknown channel " +
                                   std::to_string(ch));
            channels_[ch].tokens.push_back(t);
            if (!channels_[ch].waiters.empty())
                cores_[channels_[ch].waiters.front()].blocked = false;
        }
    }

    std::string deadlockReport() const
    {
        std::ostringstream os;
        os << "deadlock in workload '" << w_.name << "':";
        for (std::size_t c = 0; c < channels_.size(); ++c) {
            if (channels_[c].waiters.empty())
                continue;
            os << " channel '" << w_.channels[c].name << "' ("
               << channels_[c].tokens.size() << " tokens) blocks cores";
            for (int core : channels_[c].waiters)
                os << ' ' << core;
            os << ';';
        }
        return os.str();
    }

    Workload &w_;
    const SystemConfig &cfg_;
    MemoryHierarchy mem_;
    std::vector<CoreState> cores_;
    std::vector<ChannelState> channels_;
    std::vector<std::int64_t> bases_;
    SimStats stats_;
};

} // namespace

SimStats
run(Workload &w, const SystemConfig &cfg)
{
    return Engine(w, cfg).run();
}

// ---------------------------------------------------------------- traces

namespace {

void
checkName(const std::string &name)
{
    if (name.empty() ||
        name.find_first_of(" \t\r\n#") != std::string::npos)
        throw std::invalid_argument("name '" + name +
                                    "' cannot appear in a trace");
}

} // namespace

std::string
formatProgramTrace(const Workload &w)
{
    std::ostringstream os;
    os << "# alpine program trace v1\n";
    os << "WORKLOAD " << (w.name.empty() ? "unnamed" : w.name) << '\n';
    os << "CORES " << w.programs.size() << '\n';
    for (const auto &r : w.regions) {
        checkName(r.name);
        os << "REGION " << r.name << ' ' << r.size << '\n';
    }
    for (const auto &c : w.channels) {
        checkName(c.name);
        os << "CHANNEL " << c.name << ' ' << c.initial_tokens << '\n';
    }
    const auto &tiles = w.tiles.tiles();
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        const auto &tile = tiles[t];
        os << "TILE " << t << ' ' << tile.rows() << ' ' << tile.cols() << ' '
           << tile.crossbar().outShift() << ' ' << (tile.functional() ? 1 : 0)
           << ' ' << tile.timing().t_mvm.count() << ' '
           << tile.timing().bandwidth_bytes_per_s << '\n';
    }
    const auto &binds = w.tiles.bindings();
    for (std::size_t c = 0; c < binds.size(); ++c)
        for (std::size_t s = 0; s < binds[c].size(); ++s)
            if (binds[c][s] >= 0)
                os << "BIND " << c << ' ' << binds[c][s] << ' ' << s << '\n';
    for (std::size_t c = 0; c < w.programs.size(); ++c) {
        for (const Step &s : w.programs[c].steps) {
            const std::string tag(subRoiName(s.tag));
            std::visit(
                [&](const auto &b) {
                    using T = std::decay_t<decltype(b)>;
                    if constexpr (std::is_same_v<T, step::Compute>) {
                        os << "COMPUTE core=" << c << " int8=" << b.int8_ops
                           << " fp32=" << b.fp32_ops
                           << " scalar=" << b.scalar_ops << " tag=" << tag
                           << '\n';
                    } else if constexpr (std::is_same_v<T, step::Mem>) {
                        os << (b.write ? "MEM_WRITE" : "MEM_READ")
                           << " core=" << c << " region=" << b.region
                           << " offset=" << b.offset << " bytes=" << b.bytes
                           << " tag=" << tag << '\n';
                    } else if constexpr (std::is_same_v<T, step::Cm>) {
                        os << formatTraceLine({b.instr, static_cast<int>(c),
                                               tag})
                           << '\n';
                    } else if constexpr (std::is_same_v<T, step::CmVector>) {
                        const std::uint32_t slot_bits =
                            static_cast<std::uint32_t>(b.slot) << 24;
                        for (int off = 0; off < b.count; off += kLanesPerWord) {
                            const int n = std::min(kLanesPerWord, b.count - off);
                            CmInstruction i;
                            if (b.op == CmOp::Queue) {
                                Word32 word = 0;
                                if (!b.payload.empty())
                                    word = packPartial(
                                        std::span<const Q8>(b.payload)
                                            .subspan(off, n));
                                i = CmInstruction::queue(word, n, 0);
                            } else {
                                i = CmInstruction::dequeue(n, 0);
                            }
                            i.rn = static_cast<std::uint32_t>(b.index + off) |
                                   slot_bits;
                            os << formatTraceLine(
                                      {i, static_cast<int>(c), tag})
                               << '\n';
                        }
                    } else if constexpr (std::is_same_v<T, step::SyncWait>) {
                        os << "SYNC_WAIT core=" << c
                           << " channel=" << b.channel
                           << " tokens=" << b.tokens << " tag=" << tag
                           << '\n';
                    } else {
                        os << "SYNC_SIGNAL core=" << c << " channels=";
                        for (std::size_t k = 0; k < b.channels.size(); ++k)
                            os << (k ? "," : "") << b.channels[k];
                        os << " tag=" << tag << '\n';
                    }
                },
                s.body);
        }
    }
    return os.str();
}

namespace {

struct LineFields {
    std::string head;
    std::vector<std::pair<std::string, std::string>> kv;
    std::vector<std::string> positional;
};

LineFields
splitLine(const std::string &line)
{
    LineFields f;
    std::istringstream is(line);
    is >> f.head;
    std::string tok;
    while (is >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos)
            f.positional.push_back(tok);
        else
            f.kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    }
    return f;
}

std::int64_t
toInt(const std::string &s, std::size_t line_no)
{
    try {
        std::size_t used = 0;
        const auto v = std::stoll(s, &used, 10);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception &) {
        throw TraceParseError(line_no, "expected an integer, got '" + s + "'");
    }
}

const std::string &
field(const LineFields &f, const std::string &key, std::size_t line_no)
{
    for (const auto &[k, v] : f.kv)
        if (k == key)
            return v;
    throw TraceParseError(line_no, f.head + " is missing '" + key + "'");
}

SubRoi
tagOf(const LineFields &f, std::size_t line_no)
{
    const auto &t = field(f, "tag", line_no);
    const auto tag = subRoiFromName(t);
    if (!tag)
        throw TraceParseError(line_no, "unknown sub-ROI tag '" + t + "'");
    return *tag;
}

} // namespace

Workload
parseProgramTrace(std::string_view text)
{
    Workload w;
    std::istringstream is{std::string(text)};
    std::string raw;
    std::size_t line_no = 0;
    auto program = [&](const LineFields &f) -> CoreProgram & {
        const auto core = toInt(field(f, "core", line_no), line_no);
        if (core < 0 || core >= static_cast<std::int64_t>(w.programs.size()))
            throw TraceParseError(line_no, "core " + std::to_string(core) +
                                               " outside CORES");
        return w.programs[core];
    };
    while (std::getline(is, raw)) {
        ++line_no;
        if (const auto hash = raw.find('#'); hash != std::string::npos)
            raw.erase(hash);
        const LineFields f = splitLine(raw);
        if (f.head.empty())
            continue;
        const auto &p = f.positional;
        auto needPositional = [&](std::size_t n) {
            if (p.size() != n)
                throw TraceParseError(line_no, f.head + " expects " +
                                                   std::to_string(n) +
                                                   " fields");
        };
        if (f.head == "WORKLOAD") {
            needPositional(1);
            w.name = p[0];
        } else if (f.head == "CORES") {
            needPositional(1);
            w.programs.resize(toInt(p[0], line_no));
        } else if (f.head == "REGION") {
            needPositional(2);
            w.addRegion(p[0], toInt(p[1], line_no));
        } else if (f.head == "CHANNEL") {
            needPositional(2);
            w.addChannel(p[0], static_cast<int>(toInt(p[1], line_no)));
        } else if (f.head == "TILE") {
            needPositional(7);
            if (toInt(p[0], line_no) !=
                static_cast<std::int64_t>(w.tiles.tiles().size()))
                throw TraceParseError(line_no, "tiles must be listed in order");
            TileTiming timing;
            timing.t_mvm = Picoseconds{toInt(p[5], line_no)};
            timing.bandwidth_bytes_per_s = toInt(p[6], line_no);
            AimcTile tile(Crossbar(static_cast<int>(toInt(p[1], line_no)),
                                   static_cast<int>(toInt(p[2], line_no)),
                                   static_cast<int>(toInt(p[3], line_no))),
                          timing);
            tile.setFunctional(toInt(p[4], line_no) != 0);
            w.tiles.addTile(std::move(tile));
        } else if (f.head == "BIND") {
            needPositional(3);
            w.tiles.bind(static_cast<int>(toInt(p[0], line_no)),
                         static_cast<int>(toInt(p[1], line_no)),
                         static_cast<int>(toInt(p[2], line_no)));
        } else if (f.head.rfind("CM_", 0) == 0) {
            const auto rec = parseTraceLine(raw, line_no);
            if (!rec.tag)
                throw TraceParseError(line_no, "CM line without tag");
            const auto tag = subRoiFromName(*rec.tag);
            if (!tag)
                throw TraceParseError(line_no, "unknown sub-ROI tag '" +
                                                   *rec.tag + "'");
            program(f).cm(*tag, rec.instr);
        } else if (f.head == "COMPUTE") {
            program(f).compute(tagOf(f, line_no),
                               toInt(field(f, "int8", line_no), line_no),
                               toInt(field(f, "fp32", line_no), line_no),
                               toInt(field(f, "scalar", line_no), line_no));
        } else if (f.head == "MEM_READ" || f.head == "MEM_WRITE") {
            const int region =
                static_cast<int>(toInt(field(f, "region", line_no), line_no));
            const auto off = toInt(field(f, "offset", line_no), line_no);
            const auto bytes = toInt(field(f, "bytes", line_no), line_no);
            if (f.head == "MEM_READ")
                program(f).read(tagOf(f, line_no), region, off, bytes);
            else
                program(f).write(tagOf(f, line_no), region, off, bytes);
        } else if (f.head == "SYNC_WAIT") {
            program(f).wait(
                tagOf(f, line_no),
                static_cast<int>(toInt(field(f, "channel", line_no), line_no)),
                static_cast<int>(toInt(field(f, "tokens", line_no), line_no)));
        } else if (f.head == "SYNC_SIGNAL") {
            std::vector<int> chans;
            std::istringstream cs(field(f, "channels", line_no));
            std::string item;
            while (std::getline(cs, item, ','))
                chans.push_back(static_cast<int>(toInt(item, line_no)));
            program(f).signal(tagOf(f, line_no), std::move(chans));
        } else {
            throw TraceParseError(line_no, "unknown record '" + f.head + "'");
        }
    }
    return w;
}

} // namespace alpine
