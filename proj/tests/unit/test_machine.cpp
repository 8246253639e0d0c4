#include "alpine/machine.hpp"

#include <doctest.h>

using namespace alpine;

namespace {

SystemConfig
oneCore()
{
    auto cfg = SystemConfig::highPower();
    cfg.n_cores = 1;
    return cfg;
}

void
checkAccounting(const SimStats &s)
{
    for (const auto &c : s.cores)
        CHECK(c.totalCycles() == s.wall_cycles);
}

} // namespace

TEST_SUITE("machine") {

TEST_CASE("profiles")
{
    const auto hp = SystemConfig::highPower();
    const auto lp = SystemConfig::lowPower();
    CHECK(hp.core_freq_mhz == 2300);
    CHECK(lp.core_freq_mhz == 800);
    CHECK(hp.cyclesFor(Picoseconds(100'000)) == 230);
    CHECK(lp.cyclesFor(Picoseconds(100'000)) == 80);
    CHECK(hp.cyclesFor(Picoseconds(1)) == 1); // partial cycles round up
    CHECK(hp.cyclesFor(Picoseconds(0)) == 0);
    CHECK(profileFromName("low_power") == Profile::LowPower);
    CHECK_THROWS(profileFromName("medium"));
}

TEST_CASE("config json overrides and rejects unknown keys")
{
    auto cfg = configFromJson({{"profile", "low_power"}, {"n_cores", 4}});
    CHECK(cfg.core_freq_mhz == 800);
    CHECK(cfg.n_cores == 4);
    CHECK(configFromJson(configToJson(cfg)).n_cores == 4);
    CHECK_THROWS_AS(configFromJson({{"n_corez", 4}}), ConfigError);
    CHECK_THROWS_AS(configFromJson({{"n_cores", 0}}), ConfigError);
}

TEST_CASE("cache is set-associative LRU")
{
    Cache c(1024, 64, 8); // 2 sets
    CHECK(c.sets() == 2);
    for (std::uint64_t k = 0; k < 8; ++k)
        CHECK_FALSE(c.access(2 * k, false).hit);
    CHECK(c.access(0, false).hit); // line 2 is now the oldest in set 0
    const auto r = c.access(16, true);
    CHECK_FALSE(r.hit);
    CHECK(r.evicted);
    CHECK(r.victim == 2);
    CHECK(c.contains(0));
    CHECK_FALSE(c.contains(2));
    CHECK(c.isDirty(16));
    CHECK(c.invalidate(16));
    CHECK_FALSE(c.contains(16));
}

TEST_CASE("cold line goes to DRAM, then hits in L1")
{
    const auto cfg = oneCore();
    Workload w;
    const int r = w.addRegion("a", 4096);
    w.programs.resize(1);
    w.programs[0].read(SubRoi::InputLoad, r, 0, 4);
    w.programs[0].read(SubRoi::InputLoad, r, 0, 4);
    const auto s = run(w, cfg);
    const int dram = cfg.l1_latency + cfg.llc_latency + cfg.dram_latency;
    CHECK(s.cores[0].wfm_cycles == dram + cfg.l1_latency);
    CHECK(s.cores[0].l1_misses == 1);
    CHECK(s.cores[0].l1_hits == 1);
    CHECK(s.dram_accesses == 1);
    checkAccounting(s);
}

TEST_CASE("multi-line steps overlap their latency")
{
    const auto cfg = oneCore();
    Workload w;
    const int r = w.addRegion("a", 4096);
    w.programs.resize(1);
    w.programs[0].read(SubRoi::InputLoad, r, 0, 640); // 10 cold lines
    const auto s = run(w, cfg);
    const int occ = cfg.dram_line_cycles;
    const int lat = cfg.l1_latency + cfg.llc_latency + cfg.dram_latency;
    CHECK(s.cores[0].wfm_cycles == 10 * occ + (lat - occ));
}

TEST_CASE("streaming twice the LLC misses on every pass")
{
    const auto cfg = oneCore();
    const std::int64_t bytes = 2 * cfg.llc_size;
    Workload w;
    const int r = w.addRegion("big", bytes);
    w.programs.resize(1);
    w.programs[0].read(SubRoi::InputLoad, r, 0, bytes);
    w.programs[0].read(SubRoi::InputLoad, r, 0, bytes);
    const auto s = run(w, cfg);
    CHECK(s.llc_misses == 2 * bytes / cfg.line_size);
    CHECK(s.llc_hits == 0);
}

TEST_CASE("a small region stays resident")
{
    const auto cfg = oneCore();
    Workload w;
    const int r = w.addRegion("small", 16 * 1024);
    w.programs.resize(1);
    for (int k = 0; k < 3; ++k)
        w.programs[0].read(SubRoi::InputLoad, r, 0, 16 * 1024);
    const auto s = run(w, cfg);
    CHECK(s.cores[0].l1_misses == 256);
    CHECK(s.cores[0].l1_hits == 512);
}

TEST_CASE("writes invalidate other cores' copies")
{
    auto cfg = SystemConfig::highPower();
    cfg.n_cores = 2;
    Workload w;
    const int r = w.addRegion("shared", 64);
    const int ch = w.addChannel("ready");
    const int back = w.addChannel("back");
    w.programs.resize(2);
    w.programs[1].read(SubRoi::InputLoad, r, 0, 64);
    w.programs[1].signal(SubRoi::Sync, {ch});
    w.programs[1].wait(SubRoi::Sync, back);
    w.programs[1].read(SubRoi::InputLoad, r, 0, 64);
    w.programs[0].wait(SubRoi::Sync, ch);
    w.programs[0].write(SubRoi::OutputWriteback, r, 0, 64);
    w.programs[0].signal(SubRoi::Sync, {back});
    const auto s = run(w, cfg);
    CHECK(s.cores[1].l1_misses == 2);
    CHECK(s.cores[1].l1_hits == 0);
}

TEST_CASE("compute cost")
{
    const auto cfg = oneCore();
    Workload w;
    w.programs.resize(1);
    w.programs[0].compute(SubRoi::DigitalMvm, 1600);
    w.programs[0].compute(SubRoi::DigitalActivation, 0, 10, 7);
    const auto s = run(w, cfg);
    CHECK(s.cores[0].active_cycles == 100 + 10 * cfg.fp32_op_cycles + 7);
    CHECK(s.subroi(SubRoi::DigitalMvm) == 100);
    CHECK(s.cores[0].wfm_cycles == 0);
}

TEST_CASE("CM_PROCESS waits for the tile")
{
    const auto cfg = oneCore();
    Workload w;
    w.tiles = TileMap::onePerCore(1, 16, 16);
    w.programs.resize(1);
    w.programs[0].cm(SubRoi::AnalogMvm, CmInstruction::process());
    const auto s = run(w, cfg);
    CHECK(s.cores[0].wfm_cycles == 230);
    CHECK(s.cores[0].active_cycles == cfg.cm_issue_cycles);
    CHECK(s.tiles.at(0).counters.processes == 1);
}

TEST_CASE("vector steps expand to one instruction per word")
{
    const auto cfg = oneCore();
    Workload w;
    w.tiles = TileMap::onePerCore(1, 10, 10);
    w.programs.resize(1);
    w.programs[0].queueVector(SubRoi::AnalogQueue, 0, 10);
    w.programs[0].dequeueVector(SubRoi::AnalogDequeue, 0, 10);
    const auto s = run(w, cfg);
    CHECK(s.cores[0].instructions == 6);
    CHECK(s.tiles.at(0).counters.queues == 3);
    CHECK(s.tiles.at(0).counters.dequeues == 3);
    // Two full words and a 2-byte tail each way.
    const auto word = cfg.cyclesFor(Picoseconds(1000));
    const auto tail = cfg.cyclesFor(Picoseconds(500));
    CHECK(s.cores[0].wfm_cycles == 2 * (2 * word + tail));
}

TEST_CASE("producer and consumer")
{
    auto cfg = SystemConfig::highPower();
    cfg.n_cores = 2;
    Workload w;
    const int ch = w.addChannel("data");
    w.programs.resize(2);
    w.programs[0].compute(SubRoi::DigitalMvm, 1600);
    w.programs[0].signal(SubRoi::Sync, {ch});
    w.programs[1].wait(SubRoi::Sync, ch);
    w.programs[1].compute(SubRoi::DigitalMvm, 160);
    const auto s = run(w, cfg);
    const std::int64_t h = cfg.sync_handoff_cycles;
    const std::int64_t producer = 100 + h;
    CHECK(s.wall_cycles == producer + h + 10);
    CHECK(s.cores[1].idle_cycles == producer);
    CHECK(s.cores[0].idle_cycles == h + 10);
    checkAccounting(s);
}

TEST_CASE("initial tokens let a consumer start at once")
{
    auto cfg = SystemConfig::highPower();
    cfg.n_cores = 1;
    cfg.sync_handoff_cycles = 0;
    Workload w;
    const int ch = w.addChannel("free", 2);
    w.programs.resize(1);
    w.programs[0].wait(SubRoi::Sync, ch, 2);
    w.programs[0].compute(SubRoi::DigitalMvm, 16);
    const auto s = run(w, cfg);
    CHECK(s.wall_cycles == 1);
}

TEST_CASE("unsatisfiable waits raise a deadlock naming the channel")
{
    auto cfg = SystemConfig::highPower();
    cfg.n_cores = 2;
    Workload w;
    const int ch = w.addChannel("never");
    w.programs.resize(2);
    w.programs[1].wait(SubRoi::Sync, ch);
    try {
        run(w, cfg);
        FAIL("expected a deadlock");
    } catch (const DeadlockError &e) {
        CHECK(std::string(e.what()).find("never") != std::string::npos);
    }
}

TEST_CASE("more programs than cores is rejected")
{
    auto cfg = SystemConfig::highPower();
    cfg.n_cores = 1;
    Workload w;
    w.programs.resize(2);
    CHECK_THROWS(run(w, cfg));
}

TEST_CASE("llcmpi")
{
    SimStats s;
    s.cores.resize(1);
    s.cores[0].instructions = 1'000'000;
    CHECK(llcmpi(s) == 0.0);
    s.llc_misses = 500;
    CHECK(llcmpi(s) == doctest::Approx(5e-4));
    s.cores[0].instructions = 0;
    CHECK_THROWS(llcmpi(s));
}

TEST_CASE("runs are deterministic")
{
    auto cfg = SystemConfig::highPower();
    cfg.n_cores = 3;
    auto make = [] {
        Workload w;
        const int r = w.addRegion("a", 1 << 16);
        const int ch = w.addChannel("c");
        w.programs.resize(3);
        for (int k = 0; k < 3; ++k) {
            w.programs[k].read(SubRoi::InputLoad, r, k * 4096, 8192);
            w.programs[k].compute(SubRoi::DigitalMvm, 512 * (k + 1));
        }
        w.programs[0].signal(SubRoi::Sync, {ch});
        w.programs[2].wait(SubRoi::Sync, ch);
        return w;
    };
    auto a = make();
    auto b = make();
    CHECK(run(a, cfg) == run(b, cfg));
}

TEST_CASE("program traces round trip")
{
    auto cfg = SystemConfig::highPower();
    cfg.n_cores = 2;
    Workload w;
    w.name = "mini";
    const int r = w.addRegion("a", 4096);
    const int ch = w.addChannel("c", 1);
    w.tiles = TileMap::onePerCore(2, 8, 8);
    w.programs.resize(2);
    w.programs[0].read(SubRoi::InputLoad, r, 0, 128);
    w.programs[0].queueVector(SubRoi::AnalogQueue, 0, 8, {1, 2, 3, 4, 5, 6, 7, 8});
    w.programs[0].cm(SubRoi::AnalogMvm, CmInstruction::process());
    w.programs[0].dequeueVector(SubRoi::AnalogDequeue, 0, 8);
    w.programs[0].signal(SubRoi::Sync, {ch});
    w.programs[1].wait(SubRoi::Sync, ch, 2);
    w.programs[1].compute(SubRoi::DigitalActivation, 64, 3, 2);
    w.programs[1].write(SubRoi::OutputWriteback, r, 64, 64);

    const auto text = formatProgramTrace(w);
    auto back = parseProgramTrace(text);
    CHECK(formatProgramTrace(back) == text);
    CHECK(run(w, cfg) == run(back, cfg));
    CHECK_THROWS_AS(parseProgramTrace("COMPUTE core=0 int8=x\n"),
                    TraceParseError);
}

}
