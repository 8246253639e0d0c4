#include "alpine/experiment.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace alpine;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path
scratchDir(const std::string &name)
{
    const auto d = fs::temp_directory_path() / ("alpine_unit_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

std::string
slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t
lineCount(const std::string &s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

ExperimentSpec
mlp(int case_id, Mapping m, int n = 256)
{
    ExperimentSpec s;
    s.model = "mlp";
    s.case_id = case_id;
    s.mapping = m;
    s.n = n;
    s.n_inferences = 2;
    return s;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("spec parsing and labels")
{
    const auto s = specFromJson({{"model", "mlp"}, {"case", 3}, {"n", 512},
                                 {"profile", "low_power"}});
    CHECK(s.label() == "mlp_case3_analog_low_power_tight_n512");
    CHECK(s.group() == "mlp/n512/low_power/i10");
    const auto l = specFromJson({{"model", "lstm"}, {"n_h", 750},
                                 {"mapping", "digital"}, {"inferences", 4}});
    CHECK(l.label() == "lstm_case1_digital_high_power_tight_nh750_i4");
    CHECK(specFromJson(specToJson(l)).label() == l.label());
    const auto c = specFromJson({{"model", "cnn"}, {"variant", "S"}});
    CHECK(c.label() == "cnn_S_analog_high_power_tight");
}

TEST_CASE("bad specs are usage errors")
{
    CHECK_THROWS_AS(specFromJson({{"model", "lstm"}, {"case", 5}}), UsageError);
    CHECK_THROWS_AS(specFromJson({{"model", "mlp"}, {"mapping", "optical"}}),
                    UsageError);
    CHECK_THROWS_AS(specFromJson({{"model", "cnn"}, {"variant", "X"}}),
                    UsageError);
    CHECK_THROWS_AS(specFromJson({{"modle", "mlp"}}), UsageError);
    CHECK_THROWS_AS(specFromJson({{"model", "missing_file.json"}}), UsageError);
    CHECK_THROWS_AS(specFromJson({{"model", "mlp"}, {"inferences", -1}}),
                    UsageError);
    CHECK_THROWS_AS(specFromJson(json::array()), UsageError);
}

TEST_CASE("config overrides and conflicts")
{
    auto s = mlp(1, Mapping::Analog);
    s.config = {{"n_cores", 4}};
    CHECK(systemConfigFor(s).n_cores == 4);
    s.config = {{"coupling", "loose"}};
    CHECK_THROWS_AS(systemConfigFor(s), UsageError);
    s.config = {{"n_cores", -1}};
    CHECK_THROWS_AS(systemConfigFor(s), UsageError);
}

TEST_CASE("reports are byte-identical across runs")
{
    const auto s = mlp(1, Mapping::Analog);
    const auto a = dumpReport(reportJson(runExperiment(s)));
    const auto b = dumpReport(reportJson(runExperiment(s)));
    CHECK(a == b);
    const auto j = json::parse(a);
    CHECK(j.at("format") == "alpine-sim-report");
    CHECK(j.at("summary").at("golden_match") == true);
    CHECK(j.at("summary").at("time_s").get<double>() > 0);
}

TEST_CASE("report numbers carry six significant digits")
{
    CHECK(round6(1.23456789) == 1.23457);
    CHECK(round6(0.0) == 0.0);
    CHECK(sci6(1.0 / 3.0) == "3.33333e-01");
}

TEST_CASE("csv rows line up with the header")
{
    const auto r = runExperiment(mlp(2, Mapping::Analog));
    const auto header = csvHeader();
    const auto row = csvRow(r);
    CHECK(std::count(header.begin(), header.end(), ',') ==
          std::count(row.begin(), row.end(), ','));
    CHECK(row.rfind("mlp,2,analog,high_power,tight,256,2,", 0) == 0);
}

TEST_CASE("sweep ratios for the MLP cases")
{
    std::vector<ExperimentSpec> specs;
    for (int c = 1; c <= 4; ++c)
        specs.push_back(mlp(c, Mapping::Analog));
    specs.push_back(mlp(1, Mapping::Digital));
    const auto results = runSweep(specs, 2);
    REQUIRE(results.size() == 5);
    for (std::size_t i = 0; i < specs.size(); ++i)
        CHECK(results[i].spec.label() == specs[i].label());
    const auto ratios = computeRatios(results);
    REQUIRE(ratios.size() == 4);
    for (const auto &r : ratios)
        CHECK(r.baseline == specs.back().label());
    // At this size the handoffs of the pipelined cases outweigh their gain.
    CHECK(ratios[0].speedup > 1.0);
    CHECK(ratios[0].speedup ==
          doctest::Approx(results[4].timeSeconds() / results[0].timeSeconds()));
}

TEST_CASE("an empty sweep only writes headers")
{
    CHECK(computeRatios({}).empty());
    CHECK(lineCount(ratiosCsvHeader()) == 1);
    const auto dir = scratchDir("empty");
    std::ofstream(dir / "s.json") << R"({"experiments": []})";
    CHECK(loadSweep(dir / "s.json").empty());
    CHECK(runSweep({}, 4).empty());
}

TEST_CASE("LSTM sweep over sizes and cases")
{
    std::vector<ExperimentSpec> specs;
    for (int nh : {256, 512, 750}) {
        ExperimentSpec d;
        d.model = "lstm";
        d.n_h = nh;
        d.mapping = Mapping::Digital;
        d.n_inferences = 1;
        specs.push_back(d);
        for (int c = 1; c <= 4; ++c) {
            auto a = d;
            a.mapping = Mapping::Analog;
            a.case_id = c;
            specs.push_back(a);
        }
    }
    const auto ratios = computeRatios(runSweep(specs, sweepThreads()));
    CHECK(ratios.size() == 12);
}

TEST_CASE("a group without a digital baseline is an error")
{
    const auto r = runExperiment(mlp(1, Mapping::Analog));
    try {
        computeRatios({r});
        FAIL("expected a usage error");
    } catch (const UsageError &e) {
        CHECK(std::string(e.what()).find("mlp/n256") != std::string::npos);
    }
}

TEST_CASE("loose runs compare against the tight digital baseline")
{
    auto loose = mlp(1, Mapping::Analog);
    loose.coupling = Coupling::Loose;
    const auto rs = runSweep({mlp(1, Mapping::Digital), loose,
                              mlp(1, Mapping::Analog)},
                             1);
    const auto ratios = computeRatios(rs);
    REQUIRE(ratios.size() == 2);
    CHECK(ratios[0].speedup < ratios[1].speedup);
}

TEST_CASE("sweep files resolve relative paths and reject bad entries")
{
    const auto dir = scratchDir("sweep");
    std::ofstream(dir / "model.json")
        << R"({"model": "mlp", "n": 64, "name": "small"})";
    std::ofstream(dir / "cfg.json") << R"({"n_cores": 4})";
    std::ofstream(dir / "s.json")
        << R"([{"model": "model.json", "config": "cfg.json"}])";
    const auto specs = loadSweep(dir / "s.json");
    REQUIRE(specs.size() == 1);
    CHECK(specs[0].model == "custom");
    CHECK(specs[0].config.at("n_cores") == 4);
    CHECK(specs[0].label().rfind("custom_small", 0) == 0);

    std::ofstream(dir / "bad.json") << R"([{"model": "mlp"}, {"case": 9}])";
    try {
        loadSweep(dir / "bad.json");
        FAIL("expected a usage error");
    } catch (const UsageError &e) {
        CHECK(std::string(e.what()).find("experiment 1") != std::string::npos);
    }
}

TEST_CASE("atomic writes replace whole files")
{
    const auto dir = scratchDir("atomic");
    const auto p = dir / "nested" / "out.txt";
    writeFileAtomic(p, "first\n");
    CHECK(slurp(p) == "first\n");
    writeFileAtomic(p, "second\n");
    CHECK(slurp(p) == "second\n");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto &e : fs::directory_iterator(dir / "nested"))
        ++files;
    CHECK(files == 1);
}

TEST_CASE("plot data files")
{
    const auto dir = scratchDir("plot");
    const auto rs = runSweep({mlp(1, Mapping::Analog), mlp(1, Mapping::Digital)},
                             1);
    const auto files = writePlotData(rs, dir);
    CHECK(files.size() == 3);
    for (const auto &f : files) {
        CHECK(fs::exists(f));
        CHECK(lineCount(slurp(f)) >= 2);
    }
}

TEST_CASE("validation suites pass")
{
    for (const char *what : {"workingset", "energy", "isa"})
        for (const auto &c : validateSuite(what, 3))
            CHECK_MESSAGE(c.pass, c.name);
    CHECK_THROWS_AS(validateSuite("nothing"), UsageError);
}

TEST_CASE("thread count from the environment")
{
    ::setenv("ALPINE_SIM_THREADS", "3", 1);
    CHECK(sweepThreads() == 3);
    ::setenv("ALPINE_SIM_THREADS", "zero", 1);
    CHECK_THROWS_AS(sweepThreads(), UsageError);
    ::unsetenv("ALPINE_SIM_THREADS");
    CHECK(sweepThreads() >= 1);
}

}
