#include "alpine/energy.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace alpine {

using nlohmann::json;

EnergyTable
EnergyTable::lowPower()
{
    return {10.72, 46.04, 60.92, 3.03, 271.62, 1.81, 1.63, 120.0};
}

EnergyTable
EnergyTable::highPower()
{
    return {126.03, 638.99, 845.39, 5.82, 874.08, 5.60, 5.02, 120.0};
}

EnergyTable
EnergyTable::forProfile(Profile p)
{
    return p == Profile::LowPower ? lowPower() : highPower();
}

void
EnergyTable::validate() const
{
    for (double v : {idle_pj, wfm_pj, active_pj, memctrl_io_w,
                     llc_leak_mw_per_256kb, llc_read_pj_per_byte,
                     llc_write_pj_per_byte, dram_pj_per_access})
        if (!(v >= 0.0) || !std::isfinite(v))
            throw ConfigError("energy table entries must be finite and >= 0");
}

AimcEnergyModel
AimcEnergyModel::forProfile(Profile p)
{
    AimcEnergyModel m;
    m.tech_scale = p == Profile::LowPower ? 2.0 : 5.3;
    return m;
}

void
AimcEnergyModel::validate() const
{
    if (!(base_tops_per_w > 0.0) || !std::isfinite(base_tops_per_w))
        throw ConfigError("AIMC efficiency must be positive");
    if (!(tech_scale > 0.0) || !std::isfinite(tech_scale))
        throw ConfigError("AIMC tech_scale must be positive");
    if (!(e_dac_j >= 0.0) || !(e_adc_j >= 0.0))
        throw ConfigError("converter energies must be non-negative");
}

double
aimcMvmEnergy(int rows, int cols, const AimcEnergyModel &m)
{
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("tile dimensions must be positive");
    m.validate();
    const double cells = static_cast<double>(rows) * cols;
    return (m.cellEnergy() * cells + m.e_dac_j * rows + m.e_adc_j * cols) *
           m.tech_scale;
}

EnergyBreakdown
systemEnergy(const SimStats &s, const SystemConfig &cfg,
             const EnergyTable &t, const AimcEnergyModel &aimc)
{
    t.validate();
    if (s.core_freq_mhz != cfg.core_freq_mhz)
        throw std::invalid_argument("stats were produced at a different "
                                    "core frequency");
    for (std::size_t c = 0; c < s.cores.size(); ++c) {
        const auto &cs = s.cores[c];
        if (cs.active_cycles < 0 || cs.idle_cycles < 0 || cs.wfm_cycles < 0 ||
            cs.totalCycles() != s.wall_cycles)
            throw std::invalid_argument(
                "inconsistent stats: core " + std::to_string(c) + " accounts " +
                std::to_string(cs.totalCycles()) + " cycles, wall is " +
                std::to_string(s.wall_cycles));
    }
    if (s.llc_read_bytes < 0 || s.llc_write_bytes < 0 || s.dram_accesses < 0)
        throw std::invalid_argument("inconsistent stats: negative counters");

    constexpr double kPico = 1e-12;
    const double wall = s.wallSeconds();
    EnergyBreakdown e;
    for (const auto &cs : s.cores)
        e.core_j += (cs.active_cycles * t.active_pj + cs.wfm_cycles * t.wfm_pj +
                     cs.idle_cycles * t.idle_pj) *
                    kPico;
    const double llc_units = static_cast<double>(cfg.llc_size) / (256.0 * 1024);
    e.llc_j = t.llc_leak_mw_per_256kb * 1e-3 * llc_units * wall +
              (s.llc_read_bytes * t.llc_read_pj_per_byte +
               s.llc_write_bytes * t.llc_write_pj_per_byte) *
                  kPico;
    e.dram_j = s.dram_accesses * t.dram_pj_per_access * kPico +
               t.memctrl_io_w * wall;
    for (const auto &tile : s.tiles)
        if (tile.counters.processes > 0)
            e.aimc_j += tile.counters.processes *
                        aimcMvmEnergy(tile.rows, tile.cols, aimc);
    return e;
}

namespace {

void
readDouble(const json &j, const char *key, double &out)
{
    if (!j.contains(key))
        return;
    if (!j.at(key).is_number())
        throw ConfigError(std::string("energy key '") + key +
                          "' must be a number");
    out = j.at(key).get<double>();
}

} // namespace

EnergyTable
energyTableFromJson(const json &config, Profile p)
{
    EnergyTable t = EnergyTable::forProfile(p);
    if (!config.is_object() || !config.contains("energy"))
        return t;
    const auto &e = config.at("energy");
    readDouble(e, "idle_pj", t.idle_pj);
    readDouble(e, "wfm_pj", t.wfm_pj);
    readDouble(e, "active_pj", t.active_pj);
    readDouble(e, "memctrl_io_w", t.memctrl_io_w);
    readDouble(e, "llc_leak_mw_per_256kb", t.llc_leak_mw_per_256kb);
    readDouble(e, "llc_read_pj_per_byte", t.llc_read_pj_per_byte);
    readDouble(e, "llc_write_pj_per_byte", t.llc_write_pj_per_byte);
    readDouble(e, "dram_pj_per_access", t.dram_pj_per_access);
    t.validate();
    return t;
}

AimcEnergyModel
aimcModelFromJson(const json &config, Profile p)
{
    AimcEnergyModel m = AimcEnergyModel::forProfile(p);
    if (!config.is_object() || !config.contains("energy"))
        return m;
    const auto &e = config.at("energy");
    readDouble(e, "aimc_tops_per_w", m.base_tops_per_w);
    readDouble(e, "aimc_tech_scale", m.tech_scale);
    readDouble(e, "aimc_e_dac_j", m.e_dac_j);
    readDouble(e, "aimc_e_adc_j", m.e_adc_j);
    m.validate();
    return m;
}

json
energyToJson(const EnergyBreakdown &e)
{
    return json{{"core_j", e.core_j},
                {"llc_j", e.llc_j},
                {"dram_j", e.dram_j},
                {"aimc_j", e.aimc_j},
                {"total_j", e.total()}};
}

} // namespace alpine
