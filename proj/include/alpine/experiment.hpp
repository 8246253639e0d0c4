// Experiment runner: one spec in, one report out. Also the CSV/JSON report
// formats, sweep grouping with analog-vs-digital ratios, the self-check
// suites behind `validate`, and atomic file output.
#pragma once

#include "alpine/energy.hpp"
#include "alpine/workloads.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace alpine {

class UsageError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct ExperimentSpec {
    std::string model = "mlp"; // mlp | lstm | cnn | custom
    int case_id = 1;
    std::string variant = "F";
    int n = 1024;
    int n_h = 256;
    Mapping mapping = Mapping::Analog;
    Profile profile = Profile::HighPower;
    Coupling coupling = Coupling::Tight;
    int n_inferences = 0; // 0 = model default
    std::uint64_t seed = 1;
    nlohmann::json config = nlohmann::json::object(); // system overrides
    nlohmann::json model_desc;                        // for "custom"

    /// Throws UsageError naming the offending field.
    void validate() const;
    /// Short unique name, e.g. "mlp_case1_analog_high_power_tight_n1024".
    std::string label() const;
    /// Runs sharing a group may be compared with each other.
    std::string group() const;
    ModelSpec modelSpec() const;
};

/// Keys: model, case, variant, n, n_h, mapping, profile, coupling,
/// inferences, seed, config (object, or a path relative to base_dir), model
/// (object, or path, for custom stacks).
ExperimentSpec specFromJson(const nlohmann::json &j,
                            const std::filesystem::path &base_dir = {});
nlohmann::json specToJson(const ExperimentSpec &s);

/// The system config a spec runs on: profile defaults, then the override
/// object, then the spec's coupling.
SystemConfig systemConfigFor(const ExperimentSpec &s);

struct ExperimentResult {
    ExperimentSpec spec;
    std::string workload;
    SystemConfig cfg;
    SoftwareCosts sw;
    SimStats stats;
    EnergyBreakdown energy;
    /// Analog golden forward == digital golden forward on a seeded input;
    /// absent for CNNs.
    std::optional<bool> golden_match;

    double timeSeconds() const { return stats.wallSeconds(); }
    double llcmpi() const;
};

ExperimentResult runExperiment(const ExperimentSpec &s);

/// Six significant digits, the precision of every reported quantity.
double round6(double v);
/// Scientific notation with six significant digits.
std::string sci6(double v);

nlohmann::json reportJson(const ExperimentResult &r);
/// Stable two-space-indented dump with a trailing newline.
std::string dumpReport(const nlohmann::json &report);

std::string csvHeader();
std::string csvRow(const ExperimentResult &r);

// ---------------------------------------------------------------- sweeps

struct RatioRow {
    std::string group;
    std::string label;
    std::string baseline;
    double speedup = 0;
    double energy_ratio = 0;
    double llcmpi_ratio = 0;
};

/// Pairs every analog run with the digital baseline of its group (the
/// tightly-coupled digital run with the lowest case). Throws UsageError
/// naming a group that has analog runs but no baseline.
std::vector<RatioRow> computeRatios(const std::vector<ExperimentResult> &rs);

std::string ratiosCsvHeader();
std::string ratiosCsvRow(const RatioRow &r);

/// Accepts {"experiments": [...]} or a bare array.
std::vector<ExperimentSpec> loadSweep(const std::filesystem::path &file);

/// Runs every spec on up to `threads` workers; results keep spec order.
std::vector<ExperimentResult> runSweep(const std::vector<ExperimentSpec> &specs,
                                       int threads);

/// Worker count from ALPINE_SIM_THREADS, defaulting to the hardware
/// concurrency and never below one.
int sweepThreads();

// ---------------------------------------------------------------- plot data

/// Per-figure data files: aggregate time/memory-intensity/energy per model,
/// sub-ROI time distribution and per-core utilization. Returns the written
/// paths.
std::vector<std::filesystem::path>
writePlotData(const std::vector<ExperimentResult> &rs,
              const std::filesystem::path &dir);

// ---------------------------------------------------------------- validate

struct Check {
    std::string name;
    std::string expected;
    std::string actual;
    bool pass = false;
};

/// "workingset", "energy" or "isa".
std::vector<Check> validateSuite(std::string_view what,
                                 std::uint64_t seed = 1);

// ---------------------------------------------------------------- output

/// Writes through a temporary sibling file and renames it into place.
void writeFileAtomic(const std::filesystem::path &path,
                     std::string_view content);

} // namespace alpine
