// Python bindings. Structured values cross the boundary as JSON text and are
// decoded by the pure-Python wrapper.
#include "alpine/experiment.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace alpine;
using nlohmann::json;

namespace {

std::string
runJson(const std::string &spec)
{
    const auto r = runExperiment(specFromJson(json::parse(spec)));
    return reportJson(r).dump();
}

std::string
replayJson(const std::string &trace, const std::string &config)
{
    const auto cfg = configFromJson(json::parse(config));
    Workload w = parseProgramTrace(trace);
    return statsToJson(run(w, cfg)).dump();
}

std::string
traceOf(const std::string &spec)
{
    const auto s = specFromJson(json::parse(spec));
    const auto cfg = systemConfigFor(s);
    const Workload w = build(s.modelSpec(), s.mapping, cfg,
                             softwareCostsFromJson(s.config));
    return formatProgramTrace(w);
}

std::vector<std::tuple<std::string, std::string, std::string, bool>>
validate(const std::string &what, std::uint64_t seed)
{
    std::vector<std::tuple<std::string, std::string, std::string, bool>> out;
    for (const auto &c : validateSuite(what, seed))
        out.emplace_back(c.name, c.expected, c.actual, c.pass);
    return out;
}

std::vector<int>
mvm(int rows, int cols, const std::vector<int> &weights,
    const std::vector<int> &x, int shift)
{
    Crossbar xb(rows, cols, shift);
    if (weights.size() != static_cast<std::size_t>(rows) * cols)
        throw ShapeError("weights must hold rows * cols values");
    std::vector<Q8> w(weights.size()), v(x.size());
    for (std::size_t i = 0; i < w.size(); ++i)
        w[i] = clampQ8(weights[i]);
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = clampQ8(x[i]);
    xb.programTile(0, 0, rows, cols, w);
    const auto y = xb.mvm(v);
    return {y.begin(), y.end()};
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Multi-core AIMC system simulator";

    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<TraceParseError>(m, "TraceParseError",
                                            PyExc_ValueError);
    py::register_exception<DeadlockError>(m, "DeadlockError",
                                          PyExc_RuntimeError);

    m.def("run_json", &runJson, py::arg("spec"),
          py::call_guard<py::gil_scoped_release>());
    m.def("replay_json", &replayJson, py::arg("trace"), py::arg("config"),
          py::call_guard<py::gil_scoped_release>());
    m.def("trace", &traceOf, py::arg("spec"));
    m.def("validate", &validate, py::arg("what"), py::arg("seed") = 1);
    m.def("mvm", &mvm, py::arg("rows"), py::arg("cols"), py::arg("weights"),
          py::arg("x"), py::arg("shift") = 0);

    m.def("quantize",
          [](double x, double scale) {
              return static_cast<int>(quantize(x, ScaleFactor(scale)));
          },
          py::arg("x"), py::arg("scale"));
    m.def("saturate_acc",
          [](std::int32_t acc, int shift) {
              return static_cast<int>(saturateAcc(acc, shift));
          },
          py::arg("acc"), py::arg("shift"));
    m.def("pack4",
          [](const std::array<int, 4> &lanes) {
              return pack4({clampQ8(lanes[0]), clampQ8(lanes[1]),
                            clampQ8(lanes[2]), clampQ8(lanes[3])});
          },
          py::arg("lanes"));
    m.def("unpack4",
          [](Word32 w) {
              const auto l = unpack4(w);
              return std::array<int, 4>{l[0], l[1], l[2], l[3]};
          },
          py::arg("word"));
    m.def("encode",
          [](const std::string &line) {
              return encode(parseTraceLine(line).instr).bits;
          },
          py::arg("trace_line"));
    m.def("decode",
          [](std::uint64_t bits, int core) {
              TraceRecord rec;
              rec.instr = decode(EncodedInstr{bits});
              rec.core = core;
              return formatTraceLine(rec);
          },
          py::arg("bits"), py::arg("core") = 0);
}
