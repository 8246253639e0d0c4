// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 when any
// criterion fails.
#include "alpine/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

using namespace alpine;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void require(bool ok, const std::string &what)
    {
        if (!ok) {
            pass = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string
fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

// Results are shared between criteria so each experiment runs once.
class Runs {
  public:
    const ExperimentResult &get(const ExperimentSpec &s)
    {
        const auto key = s.label();
        auto it = cache_.find(key);
        if (it == cache_.end())
            it = cache_.emplace(key, runExperiment(s)).first;
        return it->second;
    }

    void prefetch(const std::vector<ExperimentSpec> &specs)
    {
        std::vector<ExperimentSpec> todo;
        for (const auto &s : specs)
            if (!cache_.count(s.label()))
                todo.push_back(s);
        auto rs = runSweep(todo, sweepThreads());
        for (auto &r : rs)
            cache_.emplace(r.spec.label(), std::move(r));
    }

  private:
    std::map<std::string, ExperimentResult> cache_;
};

ExperimentSpec
mlp(int case_id, Mapping m, int n = 1024, Coupling c = Coupling::Tight)
{
    ExperimentSpec s;
    s.model = "mlp";
    s.case_id = case_id;
    s.mapping = m;
    s.n = n;
    s.coupling = c;
    return s;
}

ExperimentSpec
lstm(int case_id, Mapping m, int n_h)
{
    ExperimentSpec s;
    s.model = "lstm";
    s.case_id = case_id;
    s.mapping = m;
    s.n_h = n_h;
    return s;
}

ExperimentSpec
cnn(const std::string &variant, Mapping m)
{
    ExperimentSpec s;
    s.model = "cnn";
    s.variant = variant;
    s.mapping = m;
    return s;
}

// Small stack with every layer feature: padding, stride, LRN, 2x2 and 3x3
// pools, two dense layers.
CnnSpec
smallCnn()
{
    CnnSpec s;
    s.variant = "small";
    s.in_h = 23;
    s.in_w = 23;
    s.in_c = 3;
    s.conv = {{8, 5, 2, 1, 2, true},
              {12, 3, 1, 1, 1, false},
              {16, 3, 1, 1, 3, false}};
    s.dense = {24, 10};
    s.n_inferences = 2;
    return s;
}

double
speedup(const ExperimentResult &digital, const ExperimentResult &analog)
{
    return digital.timeSeconds() / analog.timeSeconds();
}

double
energyRatio(const ExperimentResult &digital, const ExperimentResult &analog)
{
    return digital.energy.total() / analog.energy.total();
}

bool
inBand(double v, double lo, double hi)
{
    return v >= lo && v <= hi;
}

// ---------------------------------------------------------------- criteria

void
c1MvmOracle(Outcome &o)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 rng(1);
    int exact = 0;
    constexpr int kTrials = 1000;
    for (int trial = 0; trial < kTrials; ++trial) {
        const int rows = 1 + static_cast<int>(rng() % 64);
        const int cols = 1 + static_cast<int>(rng() % 64);
        AimcTile tile(rows, cols);
        tile.crossbar().setOutShift(0);
        const auto w = randomQ8(static_cast<std::size_t>(rows) * cols, 128, rng);
        const auto x = randomQ8(rows, 128, rng);
        tile.crossbar().programTile(0, 0, rows, cols, w);
        const auto y = tileMvm(tile, x, 0, 0, cols);

        bool ok = static_cast<int>(y.size()) == cols;
        for (int c = 0; ok && c < cols; ++c) {
            long long acc = 0;
            for (int r = 0; r < rows; ++r)
                acc += static_cast<long long>(x[r]) * w[r * cols + c];
            ok = y[c] == std::clamp<long long>(acc, -128, 127);
        }
        exact += ok;
    }
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
    o.detail << exact << "/" << kTrials << " exact in " << fmt(secs) << " s";
    o.require(exact == kTrials, "oracle mismatch");
    o.require(secs < 5.0, "runtime");
}

void
checks(Outcome &o, const char *suite)
{
    int passed = 0;
    const auto cs = validateSuite(suite, 1);
    for (const auto &c : cs) {
        passed += c.pass;
        if (!c.pass)
            o.require(false, c.name + " expected " + c.expected + " got " +
                                 c.actual);
    }
    o.detail << passed << "/" << cs.size() << " " << suite << " checks";
}

void
c2WorkingSets(Outcome &o)
{
    checks(o, "workingset");
    MlpSpec m;
    m.n = 1024;
    const auto ws = workingSet(m);
    // Weights 2 n^2 plus three activation vectors; analog keeps the vectors.
    o.require(ws.digital_bytes == 2LL * 1024 * 1024 + 3 * 1024,
              "MLP digital formula");
    o.require(ws.analog_bytes == 3 * 1024, "MLP analog formula");
    o.detail << "; MLP " << ws.digital_bytes << " / " << ws.analog_bytes << " B";
}

void
c3EnergyAnchors(Outcome &o)
{
    checks(o, "energy");
    const double base = 2.0 / 12.8e12 * 256 * 256;
    o.require(aimcMvmEnergy(256, 256, AimcEnergyModel{}) == base, "base node");
    o.detail << "; 256x256 " << fmt(base * 1e9) << " / "
             << fmt(aimcMvmEnergy(256, 256, AimcEnergyModel::forProfile(
                                                Profile::HighPower)) *
                    1e9)
             << " / "
             << fmt(aimcMvmEnergy(256, 256, AimcEnergyModel::forProfile(
                                                Profile::LowPower)) *
                    1e9)
             << " nJ";
}

void
c4TimingAnchors(Outcome &o)
{
    checks(o, "isa");
    const TileTiming t;
    const auto hp = SystemConfig::highPower().cyclesFor(t.processTime());
    const auto lp = SystemConfig::lowPower().cyclesFor(t.processTime());
    o.require(hp == 230 && lp == 80, "process cycles");
    o.require(t.queueTime(1024) == Picoseconds(256'000), "queue time");
    o.detail << "; process " << hp << "/" << lp << " cycles, 1024 B "
             << t.queueTime(1024).count() << " ps";
}

void
c5Scaling(Outcome &o, Runs &runs)
{
    const double d = runs.get(mlp(1, Mapping::Digital, 1024)).timeSeconds() /
                     runs.get(mlp(1, Mapping::Digital, 512)).timeSeconds();
    const double a = runs.get(mlp(1, Mapping::Analog, 1024)).timeSeconds() /
                     runs.get(mlp(1, Mapping::Analog, 512)).timeSeconds();
    const double la = runs.get(lstm(1, Mapping::Analog, 750)).timeSeconds() /
                      runs.get(lstm(1, Mapping::Analog, 256)).timeSeconds();
    const double ld = runs.get(lstm(1, Mapping::Digital, 750)).timeSeconds() /
                      runs.get(lstm(1, Mapping::Digital, 256)).timeSeconds();
    o.detail << "MLP 1024/512 digital " << fmt(d) << ", analog " << fmt(a)
             << "; LSTM 750/256 analog " << fmt(la) << ", digital " << fmt(ld);
    o.require(inBand(d, 3.0, 5.0), "MLP digital ratio");
    o.require(inBand(a, 1.6, 2.6), "MLP analog ratio");
    o.require(la <= 4.0, "LSTM analog ratio");
    o.require(ld > 5.0, "LSTM digital ratio");
    o.require(la < ld, "LSTM analog below digital");
}

void
c6Trends(Outcome &o, Runs &runs)
{
    struct Band {
        const char *name;
        ExperimentSpec digital, analog;
        double lo, hi;
    };
    const Band bands[] = {
        {"MLP case 1", mlp(1, Mapping::Digital), mlp(1, Mapping::Analog), 5,
         25},
        {"LSTM n_h=750", lstm(1, Mapping::Digital, 750),
         lstm(1, Mapping::Analog, 750), 4, 20},
        {"CNN-S", cnn("S", Mapping::Digital), cnn("S", Mapping::Analog), 8,
         40},
    };
    for (const auto &b : bands) {
        const auto &d = runs.get(b.digital);
        const auto &a = runs.get(b.analog);
        const double s = speedup(d, a);
        const double e = energyRatio(d, a);
        o.detail << b.name << " speedup " << fmt(s) << " energy " << fmt(e)
                 << "  ";
        o.require(inBand(s, b.lo, b.hi), std::string(b.name) + " speedup");
        o.require(inBand(e, b.lo, b.hi), std::string(b.name) + " energy");
    }
}

void
c7Orderings(Outcome &o, Runs &runs)
{
    const double m1 = runs.get(mlp(1, Mapping::Analog)).timeSeconds();
    const double m3 = runs.get(mlp(3, Mapping::Analog)).timeSeconds();
    const double m4 = runs.get(mlp(4, Mapping::Analog)).timeSeconds();
    o.detail << "MLP t1 " << fmt(m1) << " < t3 " << fmt(m3) << " < t4 "
             << fmt(m4);
    o.require(m1 < m3 && m3 < m4, "MLP case order");

    const double l1 = runs.get(lstm(1, Mapping::Analog, 750)).timeSeconds();
    const double l4 = runs.get(lstm(4, Mapping::Analog, 750)).timeSeconds();
    o.detail << "; LSTM t4 " << fmt(l4) << " <= t1 " << fmt(l1);
    o.require(l4 <= l1, "LSTM case 4 vs case 1");

    const double tight = m1;
    const double loose =
        runs.get(mlp(1, Mapping::Analog, 1024, Coupling::Loose)).timeSeconds();
    const double digital = runs.get(mlp(1, Mapping::Digital)).timeSeconds();
    o.detail << "; loose " << fmt(loose / tight) << "x slower, "
             << fmt(digital / loose) << "x faster than digital";
    o.require(loose > tight, "loose slower than tight");
    o.require(loose < digital, "loose faster than digital");

    double s[3];
    const char *variants[] = {"S", "M", "F"};
    for (int k = 0; k < 3; ++k)
        s[k] = speedup(runs.get(cnn(variants[k], Mapping::Digital)),
                       runs.get(cnn(variants[k], Mapping::Analog)));
    o.detail << "; CNN S " << fmt(s[0]) << " >= M " << fmt(s[1]) << " >= F "
             << fmt(s[2]);
    o.require(s[0] >= s[1] && s[1] >= s[2], "CNN speedup order");
}

void
c8Llcmpi(Outcome &o, Runs &runs)
{
    const double digital = runs.get(mlp(1, Mapping::Digital)).llcmpi();
    double lo = 1e300, hi = 0;
    o.detail << "digital " << fmt(digital) << ", analog";
    for (int c = 1; c <= 4; ++c) {
        const double a = runs.get(mlp(c, Mapping::Analog)).llcmpi();
        o.detail << " " << fmt(a);
        o.require(a < digital, "case " + std::to_string(c) + " below digital");
        lo = std::min(lo, a);
        hi = std::max(hi, a);
    }
    o.detail << "; max/min " << fmt(hi / lo);
    o.require(lo > 0 && hi / lo <= 1.5, "analog spread");
}

void
c9Determinism(Outcome &o, Runs &runs)
{
    std::vector<ExperimentSpec> specs = {
        mlp(1, Mapping::Analog), mlp(4, Mapping::Analog),
        mlp(1, Mapping::Digital), lstm(4, Mapping::Analog, 256),
        mlp(1, Mapping::Analog, 1024, Coupling::Loose)};
    ExperimentSpec custom;
    custom.model = "custom";
    custom.model_desc = modelToJson(smallCnn());
    specs.push_back(custom);

    int identical = 0;
    for (const auto &s : specs) {
        const auto a = dumpReport(reportJson(runs.get(s)));
        const auto b = dumpReport(reportJson(runExperiment(s)));
        identical += a == b;
    }
    o.detail << identical << "/" << specs.size() << " reports identical";
    o.require(identical == static_cast<int>(specs.size()), "report bytes");

    int replayed = 0;
    for (const auto &s : specs) {
        const auto cfg = systemConfigFor(s);
        Workload w = build(s.modelSpec(), s.mapping, cfg);
        const auto direct = run(w, cfg);
        Workload back = parseProgramTrace(formatProgramTrace(w));
        replayed += run(back, cfg) == direct;
    }
    o.detail << "; " << replayed << "/" << specs.size()
             << " trace replays identical";
    o.require(replayed == static_cast<int>(specs.size()), "trace replay");
}

void
c10Golden(Outcome &o)
{
    constexpr int kInputs = 100;
    std::mt19937_64 rng(10);

    int mlp_ok = 0;
    const auto m = MlpModel::random(1024, 7);
    for (int k = 0; k < kInputs; ++k) {
        const auto x = randomQ8(1024, 127, rng);
        mlp_ok += m.forward(x, Mapping::Analog, 1 + k % 4) ==
                  m.forward(x, Mapping::Digital);
    }

    int lstm_ok = 0;
    const auto l = LstmModel::random(50, 50, 256, 7);
    for (int c = 1; c <= 4; ++c) {
        auto sa = l.zeroState();
        auto sd = l.zeroState();
        for (int k = 0; k < kInputs / 4; ++k) {
            const auto x = randomQ8(50, 127, rng);
            auto a = l.step(x, sa, Mapping::Analog, c);
            auto d = l.step(x, sd, Mapping::Digital);
            lstm_ok += a.state.h == d.state.h && a.state.c == d.state.c &&
                       a.probs == d.probs;
            sa = std::move(a.state);
            sd = std::move(d.state);
        }
    }

    int cnn_ok = 0;
    const auto spec = smallCnn();
    const auto net = CnnModel::random(spec, 7);
    const auto pixels =
        static_cast<std::size_t>(spec.in_h) * spec.in_w * spec.in_c;
    for (int k = 0; k < kInputs; ++k) {
        const auto img = randomQ8(pixels, 127, rng);
        cnn_ok += net.forward(img, Mapping::Analog) ==
                  net.forward(img, Mapping::Digital);
    }
    o.detail << "MLP " << mlp_ok << ", LSTM " << lstm_ok << ", CNN " << cnn_ok
             << " of " << kInputs;
    o.require(mlp_ok == kInputs && lstm_ok == kInputs && cnn_ok == kInputs,
              "golden mismatch");
}

} // namespace

int
main()
{
    Runs runs;
    std::vector<ExperimentSpec> all;
    for (int n : {512, 1024})
        for (auto m : {Mapping::Analog, Mapping::Digital})
            all.push_back(mlp(1, m, n));
    for (int c = 2; c <= 4; ++c)
        all.push_back(mlp(c, Mapping::Analog));
    all.push_back(mlp(1, Mapping::Analog, 1024, Coupling::Loose));
    for (int nh : {256, 750}) {
        all.push_back(lstm(1, Mapping::Analog, nh));
        all.push_back(lstm(1, Mapping::Digital, nh));
    }
    all.push_back(lstm(4, Mapping::Analog, 750));
    for (const char *v : {"F", "M", "S"})
        for (auto m : {Mapping::Analog, Mapping::Digital})
            all.push_back(cnn(v, m));

    const std::pair<const char *, std::function<void(Outcome &)>> criteria[] = {
        {"C1 functional MVM oracle", c1MvmOracle},
        {"C2 working sets", c2WorkingSets},
        {"C3 AIMC energy anchors", c3EnergyAnchors},
        {"C4 timing anchors", c4TimingAnchors},
        {"C5 complexity scaling", [&](Outcome &o) {
             runs.prefetch(all);
             c5Scaling(o, runs);
         }},
        {"C6 trend bands", [&](Outcome &o) { c6Trends(o, runs); }},
        {"C7 orderings", [&](Outcome &o) { c7Orderings(o, runs); }},
        {"C8 LLCMPI", [&](Outcome &o) { c8Llcmpi(o, runs); }},
        {"C9 determinism and replay",
         [&](Outcome &o) { c9Determinism(o, runs); }},
        {"C10 analog/digital equivalence", c10Golden},
    };

    int failed = 0;
    for (const auto &[name, fn] : criteria) {
        Outcome o;
        try {
            fn(o);
        } catch (const std::exception &e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        std::printf("[%s] %s: %s\n", o.pass ? "PASS" : "FAIL", name,
                    o.detail.str().c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%zu criteria passed\n",
                static_cast<int>(std::size(criteria)) - failed,
                std::size(criteria));
    return failed ? 1 : 0;
}
