// Command-line front end: run one experiment, sweep a list of them, replay a
// program trace, or run the built-in validation suites.
#include "alpine/experiment.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace alpine;
using nlohmann::json;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

json
loadJson(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw UsageError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw UsageError("'" + path + "' is not valid JSON: " + e.what());
    }
}

std::string
readText(const std::string &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw UsageError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Appends a row to a CSV, writing the header first for a new file.
void
appendCsv(const fs::path &path, const std::string &header,
          const std::string &row)
{
    std::string body;
    if (fs::exists(path))
        body = readText(path.string());
    if (body.empty())
        body = header;
    body += row;
    writeFileAtomic(path, body);
}

void
printSummary(const ExperimentResult &r)
{
    std::printf("%s\n", r.spec.label().c_str());
    std::printf("  time      %s s\n", sci6(r.timeSeconds()).c_str());
    std::printf("  energy    %s J\n", sci6(r.energy.total()).c_str());
    std::printf("  llcmpi    %s\n", sci6(r.llcmpi()).c_str());
    std::printf("  cycles    %lld over %zu cores\n",
                static_cast<long long>(r.stats.wall_cycles),
                r.stats.cores.size());
    if (r.golden_match)
        std::printf("  golden    %s\n", *r.golden_match ? "match" : "MISMATCH");
}

struct RunOptions {
    std::string model = "mlp";
    std::string model_file;
    int case_id = 1;
    std::string variant = "F";
    int n = 1024;
    int nh = 256;
    std::string mapping = "analog";
    std::string profile = "high_power";
    std::string coupling = "tight";
    int inferences = 0;
    std::uint64_t seed = 1;
    std::string config;
    std::string out = "out";
    std::string trace;
    bool plotdata = false;
};

int
cmdRun(const RunOptions &o)
{
    json j = {{"model", o.model},         {"case", o.case_id},
              {"variant", o.variant},     {"n", o.n},
              {"n_h", o.nh},              {"mapping", o.mapping},
              {"profile", o.profile},     {"coupling", o.coupling},
              {"inferences", o.inferences}, {"seed", o.seed}};
    if (!o.model_file.empty())
        j["model"] = loadJson(o.model_file);
    if (!o.config.empty())
        j["config"] = loadJson(o.config);
    const auto spec = specFromJson(j);
    const auto result = runExperiment(spec);

    const fs::path out = o.out;
    const auto label = spec.label();
    writeFileAtomic(out / (label + ".json"), dumpReport(reportJson(result)));
    appendCsv(out / "results.csv", csvHeader(), csvRow(result));
    if (o.plotdata)
        writePlotData({result}, out / "plotdata");
    if (!o.trace.empty()) {
        Workload w = build(spec.modelSpec(), spec.mapping, result.cfg,
                           result.sw);
        writeFileAtomic(o.trace, formatProgramTrace(w));
    }
    printSummary(result);
    return result.golden_match.value_or(true) ? 0 : kExitFailure;
}

int
cmdSweep(const std::string &file, const std::string &out_dir, bool plotdata)
{
    const auto specs = loadSweep(file);
    const auto results = runSweep(specs, sweepThreads());
    const auto ratios = computeRatios(results);

    const fs::path out = out_dir;
    std::string csv = csvHeader();
    for (const auto &r : results) {
        csv += csvRow(r);
        writeFileAtomic(out / "reports" / (r.spec.label() + ".json"),
                        dumpReport(reportJson(r)));
    }
    writeFileAtomic(out / "sweep.csv", csv);
    std::string rcsv = ratiosCsvHeader();
    for (const auto &r : ratios)
        rcsv += ratiosCsvRow(r);
    writeFileAtomic(out / "ratios.csv", rcsv);
    if (plotdata && !results.empty())
        writePlotData(results, out / "plotdata");

    std::printf("%zu experiments, %zu ratio rows\n", results.size(),
                ratios.size());
    for (const auto &r : ratios)
        std::printf("  %-48s speedup %s  energy %s  llcmpi %s\n",
                    r.label.c_str(), sci6(r.speedup).c_str(),
                    sci6(r.energy_ratio).c_str(),
                    sci6(r.llcmpi_ratio).c_str());
    bool golden_ok = true;
    for (const auto &r : results)
        golden_ok = golden_ok && r.golden_match.value_or(true);
    return golden_ok ? 0 : kExitFailure;
}

int
cmdReplay(const std::string &trace, const std::string &profile,
          const std::string &coupling, const std::string &config)
{
    json c = config.empty() ? json::object() : loadJson(config);
    c["profile"] = profile;
    c["coupling"] = coupling;
    const auto cfg = configFromJson(c);
    Workload w = parseProgramTrace(readText(trace));
    const auto stats = run(w, cfg);
    std::printf("%s", dumpReport(statsToJson(stats)).c_str());
    return 0;
}

int
cmdValidate(const std::string &what, std::uint64_t seed)
{
    const auto checks = validateSuite(what, seed);
    int failed = 0;
    for (const auto &c : checks) {
        std::printf("%s  %-40s expected %-14s actual %s\n",
                    c.pass ? "PASS" : "FAIL", c.name.c_str(),
                    c.expected.c_str(), c.actual.c_str());
        failed += !c.pass;
    }
    std::printf("%s: %zu checks, %d failed\n", what.c_str(), checks.size(),
                failed);
    return failed ? kExitFailure : 0;
}

} // namespace

int
main(int argc, char **argv)
{
    CLI::App app{"Multi-core AIMC system simulator"};
    app.require_subcommand(1);

    RunOptions ro;
    auto *run = app.add_subcommand("run", "Run one experiment");
    run->add_option("--model", ro.model, "mlp, lstm or cnn");
    run->add_option("--model-file", ro.model_file,
                    "JSON description of a custom stack");
    run->add_option("--case", ro.case_id, "Mapping case (1-4)");
    run->add_option("--variant", ro.variant, "CNN variant (F, M, S)");
    run->add_option("--n", ro.n, "MLP layer width");
    run->add_option("--nh", ro.nh, "LSTM hidden size");
    run->add_option("--mapping", ro.mapping, "analog or digital");
    run->add_option("--profile", ro.profile, "low_power or high_power");
    run->add_option("--coupling", ro.coupling, "tight or loose");
    run->add_option("--inferences", ro.inferences,
                    "Inference count (0 = model default)");
    run->add_option("--seed", ro.seed, "Seed for the golden self-check");
    run->add_option("--config", ro.config, "System config overrides (JSON)");
    run->add_option("--out", ro.out, "Output directory");
    run->add_option("--emit-trace", ro.trace, "Write the program trace here");
    run->add_flag("--emit-plotdata", ro.plotdata, "Write per-figure data");

    std::string sweep_file, sweep_out = "out";
    bool sweep_plot = false;
    auto *sweep = app.add_subcommand("sweep", "Run a list of experiments");
    sweep->add_option("specs", sweep_file, "Sweep file (JSON)")->required();
    sweep->add_option("--out", sweep_out, "Output directory");
    sweep->add_flag("--emit-plotdata", sweep_plot, "Write per-figure data");

    std::string replay_file, replay_profile = "high_power",
                             replay_coupling = "tight", replay_config;
    auto *replay = app.add_subcommand("replay", "Simulate a program trace");
    replay->add_option("trace", replay_file, "Program trace")->required();
    replay->add_option("--profile", replay_profile, "low_power or high_power");
    replay->add_option("--coupling", replay_coupling, "tight or loose");
    replay->add_option("--config", replay_config, "System config (JSON)");

    std::string what;
    std::uint64_t validate_seed = 1;
    auto *validate = app.add_subcommand("validate", "Run built-in checks");
    validate->add_option("what", what, "workingset, energy or isa")
        ->required();
    validate->add_option("--seed", validate_seed, "Fuzz seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*run)
            return cmdRun(ro);
        if (*sweep)
            return cmdSweep(sweep_file, sweep_out, sweep_plot);
        if (*replay)
            return cmdReplay(replay_file, replay_profile, replay_coupling,
                             replay_config);
        return cmdValidate(what, validate_seed);
    } catch (const UsageError &e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const ConfigError &e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return kExitUsage;
    } catch (const TraceParseError &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const DeadlockError &e) {
        std::fprintf(stderr, "deadlock: %s\n", e.what());
        return kExitFailure;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
}
