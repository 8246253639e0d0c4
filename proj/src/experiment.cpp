#include "alpine/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace alpine {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json
readJsonFile(const fs::path &p)
{
    std::ifstream in(p);
    if (!in)
        throw UsageError("cannot open '" + p.string() + "'");
    try {
        return json::parse(in);
    } catch (const json::exception &e) {
        throw UsageError("'" + p.string() + "' is not valid JSON: " + e.what());
    }
}

/// Rounds every floating-point leaf to six significant digits.
void
roundFloats(json &j)
{
    if (j.is_number_float()) {
        j = round6(j.get<double>());
    } else if (j.is_structured()) {
        for (auto &v : j)
            roundFloats(v);
    }
}

std::string
joinNumbers(const std::vector<double> &v)
{
    std::string out;
    char buf[32];
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.6g", v[i]);
        if (i)
            out += ';';
        out += buf;
    }
    return out;
}

std::string
caseField(const ExperimentSpec &s)
{
    if (s.model == "cnn")
        return s.variant;
    if (s.model == "custom") {
        const auto spec = s.modelSpec();
        if (const auto *m = std::get_if<MlpSpec>(&spec))
            return std::to_string(m->case_id);
        if (const auto *l = std::get_if<LstmSpec>(&spec))
            return std::to_string(l->case_id);
        return std::get<CnnSpec>(spec).variant;
    }
    return std::to_string(s.case_id);
}

int
sizeField(const ModelSpec &spec)
{
    if (const auto *m = std::get_if<MlpSpec>(&spec))
        return m->n;
    if (const auto *l = std::get_if<LstmSpec>(&spec))
        return l->n_h;
    return std::get<CnnSpec>(spec).in_h;
}

int
inferencesOf(const ModelSpec &spec)
{
    return std::visit([](const auto &s) { return s.n_inferences; }, spec);
}

std::string
modelKind(const ModelSpec &spec)
{
    if (std::holds_alternative<MlpSpec>(spec))
        return "mlp";
    if (std::holds_alternative<LstmSpec>(spec))
        return "lstm";
    return "cnn";
}

std::optional<bool>
goldenCheck(const ModelSpec &spec, std::uint64_t seed)
{
    std::mt19937_64 rng(seed ^ 0x5eedf00dULL);
    if (const auto *m = std::get_if<MlpSpec>(&spec)) {
        const auto model = MlpModel::random(m->n, seed);
        const auto x = randomQ8(m->n, 127, rng);
        return model.forward(x, Mapping::Analog, m->case_id) ==
               model.forward(x, Mapping::Digital);
    }
    if (const auto *l = std::get_if<LstmSpec>(&spec)) {
        const auto model = LstmModel::random(l->x, l->y, l->n_h, seed);
        auto sa = model.zeroState();
        auto sd = model.zeroState();
        for (int t = 0; t < 2; ++t) {
            const auto x = randomQ8(l->x, 127, rng);
            auto a = model.step(x, sa, Mapping::Analog, l->case_id);
            auto d = model.step(x, sd, Mapping::Digital);
            if (a.state.h != d.state.h || a.state.c != d.state.c ||
                a.probs != d.probs)
                return false;
            sa = std::move(a.state);
            sd = std::move(d.state);
        }
        return true;
    }
    return std::nullopt;
}

} // namespace

// ---------------------------------------------------------------- spec

ModelSpec
ExperimentSpec::modelSpec() const
{
    ModelSpec spec;
    try {
        if (model == "mlp") {
            MlpSpec m;
            m.n = n;
            m.case_id = case_id;
            spec = m;
        } else if (model == "lstm") {
            LstmSpec l;
            l.n_h = n_h;
            l.case_id = case_id;
            spec = l;
        } else if (model == "cnn") {
            spec = CnnSpec::fromVariant(variant);
        } else if (model == "custom") {
            if (!model_desc.is_object())
                throw UsageError("custom model needs a model description");
            spec = modelFromJson(model_desc);
        } else {
            throw UsageError("unknown model '" + model +
                             "' (expected mlp, lstm, cnn or custom)");
        }
        if (n_inferences > 0)
            std::visit([&](auto &s) { s.n_inferences = n_inferences; }, spec);
        std::visit([](const auto &s) { s.validate(); }, spec);
    } catch (const ModelError &e) {
        throw UsageError(e.what());
    }
    return spec;
}

void
ExperimentSpec::validate() const
{
    if (model != "mlp" && model != "lstm" && model != "cnn" &&
        model != "custom")
        throw UsageError("unknown model '" + model +
                         "' (expected mlp, lstm, cnn or custom)");
    if ((model == "mlp" || model == "lstm") && (case_id < 1 || case_id > 4))
        throw UsageError("invalid case " + std::to_string(case_id) + " for " +
                         model + " (expected 1..4)");
    if (model == "cnn" && variant != "F" && variant != "M" && variant != "S")
        throw UsageError("invalid CNN variant '" + variant +
                         "' (expected F, M or S)");
    if (n_inferences < 0)
        throw UsageError("inferences must be positive");
    if (!config.is_object())
        throw UsageError("config must be a JSON object");
    modelSpec();
}

std::string
ExperimentSpec::label() const
{
    std::string out;
    if (model == "cnn")
        out = "cnn_" + variant;
    else if (model == "custom")
        out = "custom_" + (model_desc.contains("name")
                               ? model_desc.at("name").get<std::string>()
                               : modelKind(modelSpec())) +
              "_case" + caseField(*this);
    else
        out = model + "_case" + std::to_string(case_id);
    out += "_" + std::string(mappingName(mapping)) + "_" +
           std::string(profileName(profile)) + "_" +
           std::string(couplingName(coupling));
    if (model == "mlp")
        out += "_n" + std::to_string(n);
    else if (model == "lstm")
        out += "_nh" + std::to_string(n_h);
    if (n_inferences > 0)
        out += "_i" + std::to_string(n_inferences);
    return out;
}

std::string
ExperimentSpec::group() const
{
    std::string g = model;
    if (model == "mlp")
        g += "/n" + std::to_string(n);
    else if (model == "lstm")
        g += "/nh" + std::to_string(n_h);
    else if (model == "cnn")
        g += "/" + variant;
    else {
        json desc = model_desc;
        desc.erase("case");
        g += "/" + desc.dump();
    }
    g += "/" + std::string(profileName(profile));
    g += "/i" + std::to_string(inferencesOf(modelSpec()));
    if (!config.empty())
        g += "/" + config.dump();
    return g;
}

ExperimentSpec
specFromJson(const json &j, const fs::path &base_dir)
{
    if (!j.is_object())
        throw UsageError("experiment must be a JSON object");
    static const std::vector<std::string> kKnown = {
        "model",   "case",     "variant",    "n",    "n_h",    "mapping",
        "profile", "coupling", "inferences", "seed", "config",
    };
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(kKnown.begin(), kKnown.end(), it.key()) == kKnown.end())
            throw UsageError("unknown experiment key '" + it.key() + "'");
    ExperimentSpec s;
    try {
        if (j.contains("model")) {
            const auto &m = j.at("model");
            if (m.is_string()) {
                s.model = m.get<std::string>();
            } else {
                s.model = "custom";
                s.model_desc = m;
            }
            if (s.model != "mlp" && s.model != "lstm" && s.model != "cnn") {
                // Anything else names a model description file.
                s.model_desc = readJsonFile(base_dir / s.model);
                s.model = "custom";
            }
        }
        if (j.contains("case"))
            s.case_id = j.at("case").get<int>();
        if (j.contains("variant"))
            s.variant = j.at("variant").get<std::string>();
        if (j.contains("n"))
            s.n = j.at("n").get<int>();
        if (j.contains("n_h"))
            s.n_h = j.at("n_h").get<int>();
        if (j.contains("mapping"))
            s.mapping = mappingFromName(j.at("mapping").get<std::string>());
        if (j.contains("profile"))
            s.profile = profileFromName(j.at("profile").get<std::string>());
        if (j.contains("coupling"))
            s.coupling = couplingFromName(j.at("coupling").get<std::string>());
        if (j.contains("inferences"))
            s.n_inferences = j.at("inferences").get<int>();
        if (j.contains("seed"))
            s.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("config")) {
            const auto &c = j.at("config");
            s.config = c.is_string()
                           ? readJsonFile(base_dir / c.get<std::string>())
                           : c;
        }
    } catch (const json::exception &e) {
        throw UsageError(std::string("experiment: ") + e.what());
    } catch (const ModelError &e) {
        throw UsageError(e.what());
    } catch (const ConfigError &e) {
        throw UsageError(e.what());
    }
    s.validate();
    return s;
}

json
specToJson(const ExperimentSpec &s)
{
    json j = {{"mapping", mappingName(s.mapping)},
              {"profile", profileName(s.profile)},
              {"coupling", couplingName(s.coupling)},
              {"inferences", inferencesOf(s.modelSpec())},
              {"seed", s.seed},
              {"config", s.config}};
    if (s.model == "custom") {
        j["model"] = s.model_desc;
    } else {
        j["model"] = s.model;
        if (s.model == "cnn") {
            j["variant"] = s.variant;
        } else {
            j["case"] = s.case_id;
            j[s.model == "mlp" ? "n" : "n_h"] = s.model == "mlp" ? s.n : s.n_h;
        }
    }
    return j;
}

SystemConfig
systemConfigFor(const ExperimentSpec &s)
{
    json c = s.config;
    if (c.contains("profile") &&
        c.at("profile").get<std::string>() != profileName(s.profile))
        throw UsageError("config profile disagrees with the experiment");
    if (c.contains("coupling") &&
        c.at("coupling").get<std::string>() != couplingName(s.coupling))
        throw UsageError("config coupling disagrees with the experiment");
    c["profile"] = profileName(s.profile);
    c["coupling"] = couplingName(s.coupling);
    try {
        return configFromJson(c);
    } catch (const ConfigError &e) {
        throw UsageError(e.what());
    }
}

// ---------------------------------------------------------------- run

double
ExperimentResult::llcmpi() const
{
    return stats.totalInstructions() > 0 ? alpine::llcmpi(stats) : 0.0;
}

ExperimentResult
runExperiment(const ExperimentSpec &s)
{
    s.validate();
    ExperimentResult r;
    r.spec = s;
    r.cfg = systemConfigFor(s);
    try {
        r.sw = softwareCostsFromJson(s.config);
    } catch (const ConfigError &e) {
        throw UsageError(e.what());
    }
    const auto spec = s.modelSpec();
    Workload w = build(spec, s.mapping, r.cfg, r.sw);
    r.workload = w.name;
    r.stats = run(w, r.cfg);
    r.energy = systemEnergy(r.stats, r.cfg,
                            energyTableFromJson(s.config, s.profile),
                            aimcModelFromJson(s.config, s.profile));
    r.golden_match = goldenCheck(spec, s.seed);
    return r;
}

// ---------------------------------------------------------------- reports

std::string
sci6(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.5e", v);
    return buf;
}

double
round6(double v)
{
    if (v == 0.0 || !std::isfinite(v))
        return v;
    return std::strtod(sci6(v).c_str(), nullptr);
}

json
reportJson(const ExperimentResult &r)
{
    json exp = specToJson(r.spec);
    exp["label"] = r.spec.label();
    exp["group"] = r.spec.group();
    exp["workload"] = r.workload;

    json summary = {{"time_s", r.timeSeconds()},
                    {"energy_j", r.energy.total()},
                    {"llcmpi", r.llcmpi()},
                    {"wall_cycles", r.stats.wall_cycles},
                    {"instructions", r.stats.totalInstructions()},
                    {"golden_match", r.golden_match
                                         ? json(*r.golden_match)
                                         : json(nullptr)}};
    json report = {{"format", "alpine-sim-report"},
                   {"version", 1},
                   {"experiment", exp},
                   {"system", configToJson(r.cfg)},
                   {"software", softwareCostsToJson(r.sw)},
                   {"summary", summary},
                   {"energy", energyToJson(r.energy)},
                   {"stats", statsToJson(r.stats)}};
    roundFloats(report);
    return report;
}

std::string
dumpReport(const json &report)
{
    return report.dump(2) + "\n";
}

std::string
csvHeader()
{
    return "model,case,mapping,profile,coupling,n,inferences,time_s,energy_j,"
           "llcmpi,idle_pct,ipc,label\n";
}

std::string
csvRow(const ExperimentResult &r)
{
    const auto spec = r.spec.modelSpec();
    std::vector<double> idle, ipc;
    for (const auto &c : r.stats.cores) {
        idle.push_back(c.idlePct());
        ipc.push_back(c.ipc());
    }
    std::ostringstream o;
    o << modelKind(spec) << ',' << caseField(r.spec) << ','
      << mappingName(r.spec.mapping) << ',' << profileName(r.spec.profile)
      << ',' << couplingName(r.spec.coupling) << ',' << sizeField(spec) << ','
      << inferencesOf(spec) << ',' << sci6(r.timeSeconds()) << ','
      << sci6(r.energy.total()) << ',' << sci6(r.llcmpi()) << ','
      << joinNumbers(idle) << ',' << joinNumbers(ipc) << ','
      << r.spec.label() << '\n';
    return o.str();
}

// ---------------------------------------------------------------- sweeps

std::vector<RatioRow>
computeRatios(const std::vector<ExperimentResult> &rs)
{
    std::vector<std::string> order;
    std::map<std::string, std::vector<const ExperimentResult *>> groups;
    for (const auto &r : rs) {
        const auto g = r.spec.group();
        if (!groups.count(g))
            order.push_back(g);
        groups[g].push_back(&r);
    }
    std::vector<RatioRow> out;
    for (const auto &g : order) {
        const ExperimentResult *base = nullptr;
        bool has_analog = false;
        for (const auto *r : groups[g]) {
            if (r->spec.mapping == Mapping::Analog) {
                has_analog = true;
                continue;
            }
            if (r->spec.coupling != Coupling::Tight)
                continue;
            if (!base || r->spec.case_id < base->spec.case_id)
                base = r;
        }
        if (!has_analog)
            continue;
        if (!base)
            throw UsageError("sweep group '" + g +
                             "' has analog runs but no digital baseline");
        for (const auto *r : groups[g]) {
            if (r->spec.mapping != Mapping::Analog)
                continue;
            RatioRow row;
            row.group = g;
            row.label = r->spec.label();
            row.baseline = base->spec.label();
            row.speedup = base->timeSeconds() / r->timeSeconds();
            row.energy_ratio = base->energy.total() / r->energy.total();
            row.llcmpi_ratio = r->llcmpi() > 0
                                   ? base->llcmpi() / r->llcmpi()
                                   : std::numeric_limits<double>::infinity();
            out.push_back(row);
        }
    }
    return out;
}

std::string
ratiosCsvHeader()
{
    return "label,baseline,speedup,energy_ratio,llcmpi_ratio,group\n";
}

std::string
ratiosCsvRow(const RatioRow &r)
{
    // Groups may embed JSON, so they are quoted.
    std::string g;
    for (char c : r.group) {
        if (c == '"')
            g += '"';
        g += c;
    }
    return r.label + ',' + r.baseline + ',' + sci6(r.speedup) + ',' +
           sci6(r.energy_ratio) + ',' + sci6(r.llcmpi_ratio) + ",\"" + g +
           "\"\n";
}

std::vector<ExperimentSpec>
loadSweep(const fs::path &file)
{
    const json j = readJsonFile(file);
    const json *list = &j;
    if (j.is_object()) {
        if (!j.contains("experiments"))
            throw UsageError("sweep file needs an \"experiments\" array");
        list = &j.at("experiments");
    }
    if (!list->is_array())
        throw UsageError("sweep experiments must be an array");
    std::vector<ExperimentSpec> specs;
    std::size_t i = 0;
    for (const auto &e : *list) {
        try {
            specs.push_back(specFromJson(e, file.parent_path()));
        } catch (const UsageError &err) {
            throw UsageError("experiment " + std::to_string(i) + ": " +
                             err.what());
        }
        ++i;
    }
    return specs;
}

std::vector<ExperimentResult>
runSweep(const std::vector<ExperimentSpec> &specs, int threads)
{
    std::vector<ExperimentResult> results(specs.size());
    std::vector<std::exception_ptr> errors(specs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i; (i = next++) < specs.size();) {
            try {
                results[i] = runExperiment(specs[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int n = std::max(
        1, std::min<int>(threads, static_cast<int>(specs.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto &t : pool)
        t.join();
    for (const auto &e : errors)
        if (e)
            std::rethrow_exception(e);
    return results;
}

int
sweepThreads()
{
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (const char *env = std::getenv("ALPINE_SIM_THREADS")) {
        char *end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1)
            throw UsageError("ALPINE_SIM_THREADS must be a positive integer");
        n = static_cast<int>(std::min<long>(v, 1024));
    }
    return std::max(1, n);
}

// ---------------------------------------------------------------- plot data

std::vector<fs::path>
writePlotData(const std::vector<ExperimentResult> &rs, const fs::path &dir)
{
    std::vector<std::string> kinds;
    for (const auto &r : rs) {
        const auto k = modelKind(r.spec.modelSpec());
        if (std::find(kinds.begin(), kinds.end(), k) == kinds.end())
            kinds.push_back(k);
    }
    std::vector<fs::path> written;
    for (const auto &k : kinds) {
        std::ostringstream agg, dist, util;
        agg << "label,case,mapping,profile,coupling,n,time_s,llcmpi,"
               "energy_j\n";
        dist << "label";
        for (std::size_t i = 0; i < kSubRoiCount; ++i)
            dist << ',' << subRoiName(static_cast<SubRoi>(i));
        dist << '\n';
        util << "label,core,idle_pct,ipc\n";
        for (const auto &r : rs) {
            const auto spec = r.spec.modelSpec();
            if (modelKind(spec) != k)
                continue;
            const auto label = r.spec.label();
            agg << label << ',' << caseField(r.spec) << ','
                << mappingName(r.spec.mapping) << ','
                << profileName(r.spec.profile) << ','
                << couplingName(r.spec.coupling) << ',' << sizeField(spec)
                << ',' << sci6(r.timeSeconds()) << ',' << sci6(r.llcmpi())
                << ',' << sci6(r.energy.total()) << '\n';
            std::int64_t total = 0;
            for (auto c : r.stats.subroi_cycles)
                total += c;
            dist << label;
            for (auto c : r.stats.subroi_cycles)
                dist << ',' << sci6(total ? double(c) / double(total) : 0.0);
            dist << '\n';
            for (std::size_t c = 0; c < r.stats.cores.size(); ++c) {
                char buf[64];
                std::snprintf(buf, sizeof buf, "%.6g,%.6g",
                              r.stats.cores[c].idlePct(),
                              r.stats.cores[c].ipc());
                util << label << ',' << c << ',' << buf << '\n';
            }
        }
        for (const auto &[name, body] :
             {std::pair{k + "_aggregate.csv", agg.str()},
              std::pair{k + "_time_distribution.csv", dist.str()},
              std::pair{k + "_utilization.csv", util.str()}}) {
            writeFileAtomic(dir / name, body);
            written.push_back(dir / name);
        }
    }
    return written;
}

// ---------------------------------------------------------------- output

void
writeFileAtomic(const fs::path &path, std::string_view content)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out)
            throw std::runtime_error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

} // namespace alpine
