#include "alpine/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <random>

namespace alpine {

namespace {

Check
exact(std::string name, std::int64_t expected, std::int64_t actual)
{
    return {std::move(name), std::to_string(expected), std::to_string(actual),
            expected == actual};
}

Check
close(std::string name, double expected, double actual, double rel)
{
    return {std::move(name), sci6(expected), sci6(actual),
            std::abs(actual - expected) <= rel * std::abs(expected)};
}

void
workingSetChecks(std::vector<Check> &out)
{
    MlpSpec mlp;
    mlp.n = 1024;
    const auto m = workingSet(mlp);
    out.push_back(exact("mlp n=1024 digital bytes", 2'100'224, m.digital_bytes));
    out.push_back(exact("mlp n=1024 analog bytes", 3'072, m.analog_bytes));

    // Closed-form values, then the rounded figures they are reported next
    // to; the latter only need to agree within 20 %.
    struct Row {
        int n_h;
        std::int64_t digital, analog;
        double quoted_digital, quoted_analog;
    };
    const Row rows[] = {{256, 326'756, 612, 378e3, 660},
                        {512, 1'177'700, 1'124, 1.28e6, 1'170},
                        {750, 2'439'100, 1'600, 2.59e6, 1'650}};
    for (const auto &r : rows) {
        LstmSpec s;
        s.n_h = r.n_h;
        const auto ws = workingSet(s);
        const auto tag = "lstm n_h=" + std::to_string(r.n_h);
        out.push_back(exact(tag + " digital bytes", r.digital, ws.digital_bytes));
        out.push_back(exact(tag + " analog bytes", r.analog, ws.analog_bytes));
        out.push_back(close(tag + " digital vs quoted (20%)", r.quoted_digital,
                            double(ws.digital_bytes), 0.20));
        out.push_back(close(tag + " analog vs quoted (20%)", r.quoted_analog,
                            double(ws.analog_bytes), 0.20));
    }
}

void
energyChecks(std::vector<Check> &out)
{
    AimcEnergyModel base;
    out.push_back(close("aimc 256x256 base node [J]", 10.24e-9,
                        aimcMvmEnergy(256, 256, base), 1e-12));
    out.push_back(close("aimc 256x256 high_power [J]", 54.272e-9,
                        aimcMvmEnergy(256, 256,
                                      AimcEnergyModel::forProfile(
                                          Profile::HighPower)),
                        1e-12));
    out.push_back(close("aimc 256x256 low_power [J]", 20.48e-9,
                        aimcMvmEnergy(256, 256,
                                      AimcEnergyModel::forProfile(
                                          Profile::LowPower)),
                        1e-12));
    out.push_back(close("aimc 512x512 base node [J]", 40.96e-9,
                        aimcMvmEnergy(512, 512, base), 1e-12));

    const auto hp = EnergyTable::highPower();
    const auto lp = EnergyTable::lowPower();
    out.push_back(close("high_power active [pJ/cycle]", 845.39, hp.active_pj, 0));
    out.push_back(close("high_power wfm [pJ/cycle]", 638.99, hp.wfm_pj, 0));
    out.push_back(close("high_power idle [pJ/cycle]", 126.03, hp.idle_pj, 0));
    out.push_back(close("low_power active [pJ/cycle]", 60.92, lp.active_pj, 0));
    out.push_back(close("low_power wfm [pJ/cycle]", 46.04, lp.wfm_pj, 0));
    out.push_back(close("low_power idle [pJ/cycle]", 10.72, lp.idle_pj, 0));
    out.push_back(close("dram access [pJ]", 120.0, hp.dram_pj_per_access, 0));
}

CmInstruction
randomInstruction(std::mt19937_64 &rng)
{
    using namespace encoding;
    auto field = [&](int bits) {
        return static_cast<std::uint32_t>(rng() & ((1ULL << bits) - 1));
    };
    CmInstruction i;
    i.op = static_cast<CmOp>(rng() % 4);
    i.rw = rwOf(i.op);
    i.rm = field(kRmBits);
    i.ra = field(kRaBits);
    i.rn = field(kRnBits);
    i.rd = static_cast<std::uint8_t>(field(kRdBits));
    return i;
}

void
isaChecks(std::vector<Check> &out, std::uint64_t seed)
{
    const auto hp = SystemConfig::highPower();
    const auto lp = SystemConfig::lowPower();
    const TileTiming t;
    out.push_back(exact("CM_PROCESS cycles at 2.3 GHz", 230,
                        hp.cyclesFor(t.processTime())));
    out.push_back(exact("CM_PROCESS cycles at 0.8 GHz", 80,
                        lp.cyclesFor(t.processTime())));
    out.push_back(exact("queue 1024 B at 4 GB/s [ps]", 256'000,
                        t.queueTime(1024).count()));

    std::mt19937_64 rng(seed);
    constexpr int kFuzz = 10'000;
    int round_trips = 0;
    for (int k = 0; k < kFuzz; ++k) {
        const auto i = randomInstruction(rng);
        if (decode(encode(i)) == i)
            ++round_trips;
    }
    out.push_back(exact("encode/decode round trips", kFuzz, round_trips));

    int traced = 0;
    for (int k = 0; k < kFuzz; ++k) {
        TraceRecord rec;
        rec.instr = randomInstruction(rng);
        rec.instr.rm = static_cast<std::uint32_t>(rng());
        rec.core = static_cast<int>(rng() % 64);
        if (rng() & 1)
            rec.tag = "analog_queue";
        if (parseTraceLine(formatTraceLine(rec)) == rec)
            ++traced;
    }
    out.push_back(exact("trace line round trips", kFuzz, traced));

    int rejected = 0;
    for (int k = 0; k < 1000; ++k) {
        auto e = encode(randomInstruction(rng));
        e.bits |= 1ULL << (encoding::kReservedShift + rng() % 6);
        try {
            decode(e);
        } catch (const DecodeError &) {
            ++rejected;
        }
    }
    out.push_back(exact("reserved bits rejected", 1000, rejected));
}

} // namespace

std::vector<Check>
validateSuite(std::string_view what, std::uint64_t seed)
{
    std::vector<Check> out;
    if (what == "workingset")
        workingSetChecks(out);
    else if (what == "energy")
        energyChecks(out);
    else if (what == "isa")
        isaChecks(out, seed);
    else
        throw UsageError("unknown validation suite '" + std::string(what) +
                         "' (expected workingset, energy or isa)");
    return out;
}

} // namespace alpine
