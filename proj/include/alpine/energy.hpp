// Energy accounting: per-cycle core energies, LLC leakage and access energy,
// DRAM access energy plus memory-controller power, and AIMC MVM energy
// scaled from the 256x256 efficiency figure.
#pragma once

#include "alpine/machine.hpp"

#include <json.hpp>

namespace alpine {

struct EnergyTable {
    double idle_pj = 0;     // per core cycle
    double wfm_pj = 0;
    double active_pj = 0;
    double memctrl_io_w = 0;
    double llc_leak_mw_per_256kb = 0;
    double llc_read_pj_per_byte = 0;
    double llc_write_pj_per_byte = 0;
    double dram_pj_per_access = 120.0;

    static EnergyTable lowPower();
    static EnergyTable highPower();
    static EnergyTable forProfile(Profile p);
    void validate() const;
};

struct AimcEnergyModel {
    double base_tops_per_w = 12.8; // at 256 x 256
    double tech_scale = 1.0;
    double e_dac_j = 0.0;          // per input conversion
    double e_adc_j = 0.0;          // per output conversion

    /// 5.3 for the high-power node, 2.0 for the low-power node.
    static AimcEnergyModel forProfile(Profile p);
    /// Energy of one weight multiply-accumulate pair, in joules.
    double cellEnergy() const { return 2.0 / (base_tops_per_w * 1e12); }
    void validate() const;
};

/// (e_cell * M * N + e_dac * M + e_adc * N) * tech_scale, in joules.
double aimcMvmEnergy(int rows, int cols, const AimcEnergyModel &m);

struct EnergyBreakdown {
    double core_j = 0;
    double llc_j = 0;
    double dram_j = 0;
    double aimc_j = 0;

    double total() const { return core_j + llc_j + dram_j + aimc_j; }
};

/// Sums the component energies. MVM counts and tile sizes come from
/// stats.tiles. Throws when the per-core cycle totals disagree with the wall
/// time.
EnergyBreakdown systemEnergy(const SimStats &stats, const SystemConfig &cfg,
                             const EnergyTable &table,
                             const AimcEnergyModel &aimc);

/// Reads the optional "energy" object of a system config, on top of the
/// profile defaults.
EnergyTable energyTableFromJson(const nlohmann::json &config, Profile p);
AimcEnergyModel aimcModelFromJson(const nlohmann::json &config, Profile p);
nlohmann::json energyToJson(const EnergyBreakdown &e);

} // namespace alpine
