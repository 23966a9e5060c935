#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "phc/analysis.hpp"
#include "phc/geometry.hpp"

namespace phc
{

// one cavity recipe of either family together with its material
struct CavityDesign
{
    std::variant<M7Params, NanobeamParams> params { M7Params {} };
    MaterialParams material;

    bool is_m7() const { return std::holds_alternative<M7Params>(params); }
    void validate() const;
    DielectricStructure build() const;
};

// one oxidation cycle: material removed from every exposed diamond surface
struct EtchStep
{
    double surface_recession = 1.5;  // nm per surface per step

    void validate() const;
};

// enlarges every hole radius by the recession and thins the slab (and beam
// width) by twice the recession; throws when the result is no longer a valid
// design, naming the violated constraint
CavityDesign etch_once(const CavityDesign& design, const EtchStep& step);

enum class TuneParameter
{
    all_radii,
    thickness
};

// spectrum backend: solves a design and returns its labelled resonant modes
using SpectrumSolver = std::function<std::vector<ResonantMode>(const CavityDesign&)>;

struct ModeShift
{
    std::string label;
    Parity parity = Parity::indeterminate;
    double lambda_base = 0.0;       // nm
    double lambda_perturbed = 0.0;  // nm, meaningless when ambiguous
    double slope = 0.0;             // nm shift per nm of parameter change
    bool ambiguous = false;         // matching failed, slope omitted
};

struct SensitivityReport
{
    TuneParameter parameter = TuneParameter::all_radii;
    double delta = 0.0;  // nm applied to the parameter
    std::vector<ModeShift> shifts;

    double mean_slope() const;  // over unambiguous modes
};

// finite-difference wavelength slope of every base mode under a small change
// of the chosen parameter; modes are matched across the two solves by parity
// and nearest wavelength
SensitivityReport sensitivity(const CavityDesign& design, TuneParameter parameter, double delta,
                              const SpectrumSolver& solve);

struct TracePoint
{
    int step = 0;
    std::string label;
    double wavelength = 0.0;  // nm
    double q = 0.0;
};

// per-step history of an etch sequence; designs.front() is the unetched
// design and labels stay attached to the same physical mode across steps
struct TuningTrace
{
    std::vector<CavityDesign> designs;
    std::vector<TracePoint> points;

    std::vector<TracePoint> track(const std::string& label) const;
    std::vector<std::string> labels() const;
};

TuningTrace etch_sequence(const CavityDesign& design, const EtchStep& step, int n_steps,
                          const SpectrumSolver& solve);

struct TuningPlan
{
    int steps_required = 0;
    double start_wavelength = 0.0;      // nm, tracked mode before etching
    double predicted_wavelength = 0.0;  // nm, tracked mode after the planned steps
    double tolerance = 0.0;             // nm, half linewidth of the tracked mode
    int solver_calls = 0;
};

// smallest number of etch steps that brings the labelled mode down to the
// target wavelength (within half a linewidth); only blue tuning is possible
TuningPlan plan_to_target(const CavityDesign& design, const std::string& mode_label,
                          double target_lambda, const EtchStep& step, const SpectrumSolver& solve,
                          int max_steps = 64);

} // namespace phc
