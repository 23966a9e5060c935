#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phc/analysis.hpp"
#include "phc/config.hpp"
#include "phc/fdtd.hpp"
#include "phc/geometry.hpp"
#include "phc/grid.hpp"
#include "phc/io.hpp"
#include "phc/purcell.hpp"
#include "phc/tuning.hpp"

namespace phc
{

// resolved design source: a parametric cavity or an imported mask image,
// optionally with fabrication disorder applied on top
struct DesignSpec
{
    CavityDesign cavity;
    std::string mask_path;  // non-empty switches to mask import
    MaskImportOptions mask_options;
    double mask_pitch = 275.0;  // nm, scale reference for mask designs
    double position_jitter = 0.0;
    double radius_jitter = 0.0;
    std::uint64_t jitter_seed = 1;

    bool uses_mask() const { return !mask_path.empty(); }
    bool is_m7() const { return uses_mask() || cavity.is_m7(); }
    double lattice_constant() const;
    double refractive_index() const;
    DielectricStructure build() const;
};

// discretization and run shape shared by all simulating commands
struct SimSettings
{
    double dx = 0.0;  // nm, 0 derives lattice_constant / 16
    double courant = 0.5;
    PmlParams pml;
    double margin_x = 0.0;   // air added beyond the slab footprint, nm
    double margin_y = 0.0;
    double margin_z = 625.0;
    Mirror symmetry_x = Mirror::none;
    Mirror symmetry_z = Mirror::odd;                            // vertically even slab modes
    std::vector<Mirror> sectors { Mirror::even, Mirror::odd };  // y-mirror per run
    double wavelength = 780.0;  // pulse carrier, nm
    double bandwidth = 0.2;     // fractional
    double ringdown_periods = 400.0;
    double dft_periods = 200.0;  // field-accumulation pass length
    double max_memory_gb = 6.0;

    double resolved_dx(const DesignSpec& design) const;
};

struct AnalysisSettings
{
    double band_min = 700.0;  // nm
    double band_max = 840.0;
    int max_modes = 8;
    double amplitude_floor = 0.02;  // of the strongest mode in the band, per sector
    int spectrum_points = 600;
    bool mode_fields = true;  // second pass for volumes and parity checks
};

struct PurcellSettings
{
    EnsembleParams ensemble;
    double q_override = 0.0;      // > 0 replaces the analyzed mode's q
    double v_mod_override = 0.0;  // > 0 replaces the analyzed mode's volume
    std::string field;            // mode-field base name inside the output directory
    std::string mode;             // mode label in modes.json supplying q and volume
};

struct TuningSettings
{
    EtchStep step;
    int steps = 5;
    TuneParameter parameter = TuneParameter::all_radii;
    double delta = 1.5;  // nm, sensitivity probe
    std::string mode;    // tracked label for plan_to_target
    double target = 0.0; // nm, 0 disables planning
};

struct RunConfig
{
    DesignSpec design;
    SimSettings sim;
    AnalysisSettings analysis;
    PurcellSettings purcell;
    TuningSettings tuning;
    std::string out_dir = "out";
};

// typed view of a parsed config document; file paths are resolved against
// base_dir and referenced input files must exist
RunConfig load_run_config(const ConfigDoc& doc, const std::string& base_dir);

std::string sector_tag(Mirror sector);  // yeven / yodd / full
Mirror sector_from_tag(const std::string& tag);

EpsilonGrid rasterize_design(const DesignSpec& design, const SimSettings& sim);

// sources and probes at fixed low-symmetry points scaled by the design's
// lattice constant; the y mirror of the returned config is the sector
SimConfig make_sim_config(const DesignSpec& design, const SimSettings& sim, Mirror sector);

struct SectorModes
{
    Mirror sector = Mirror::none;
    std::vector<ExtractedMode> modes;
    PencilReport report;
};

// per-probe matrix-pencil extraction merged across probes of one sector;
// modes below the amplitude floor are dropped
SectorModes merge_probe_modes(Mirror sector, const std::vector<LoadedProbe>& probes,
                              const AnalysisSettings& analysis);

// cross-sector merge into labelled resonant modes
std::vector<ResonantMode> merge_sector_modes(const std::vector<SectorModes>& sectors);

struct SolveOutput
{
    std::vector<ResonantMode> modes;         // labelled, sorted by descending wavelength
    std::vector<ModeField> fields;           // pass-two fields, labelled like the modes
    std::vector<std::string> field_labels;
    EpsilonGrid grid;
};

// complete in-memory pipeline: sector runs, extraction, merging and the
// optional field pass with mode volumes and parity confirmation
SolveOutput solve_design(const DesignSpec& design, const SimSettings& sim,
                         const AnalysisSettings& analysis);

// tuning backend running the full pipeline per candidate design, without the
// field pass
SpectrumSolver make_fdtd_solver(const SimSettings& sim, const AnalysisSettings& analysis);

} // namespace phc
