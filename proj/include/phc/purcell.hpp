#pragma once

#include "phc/fdtd.hpp"
#include "phc/grid.hpp"

#include <cstdint>

namespace phc
{

// decay branching of the bare emitter; fractions of the total decay rate
struct BranchingRatios
{
    double zpl = 0.04;            // coherent zero-phonon emission
    double psb = 0.01;            // phonon sideband
    double nonradiative = 0.95;

    void validate() const;
};

// peak rate enhancement for a perfectly aligned on-resonance emitter;
// v_mod is given in units of (lambda/n)^3
double ideal_purcell(double q, double v_mod);

struct EmitterRates
{
    double total_rate = 0.0;       // relative to the bare total decay rate
    double zpl_fraction = 0.0;     // of all decays
    double efficiency_gain = 0.0;  // radiative quantum efficiency over bare
    double zpl_rate = 0.0;         // relative to the bare total decay rate
    double psb_rate = 0.0;
    double nonradiative_rate = 0.0;
};

// applies a Purcell factor to the zero-phonon line only
EmitterRates single_emitter_rates(double purcell, const BranchingRatios& branching);

// Lorentzian-line reduction of the Purcell factor for a broad or detuned
// emitter; widths and detuning share any one unit
double spectral_overlap(double cavity_fwhm, double emitter_fwhm, double detuning);

struct EnsembleParams
{
    double q = 400.0;
    double v_mod = 1.5;            // (lambda/n)^3 units
    BranchingRatios branching;
    double emitter_fwhm = 2.0;     // nm
    double detuning = 0.0;         // nm, cavity minus emitter line
    double inhomogeneous_sigma = 0.0;  // nm, per-emitter detuning spread
    double suppression = 1.0;      // off-resonance ZPL rate factor
    double collection = 1.0;       // detected fraction, cancels in the ratio
    double spot_waist = 405.7;     // nm, detection beam intensity waist
    bool in_plane_dipoles = true;  // false draws orientations on the sphere
    int samples = 2000;
    std::uint64_t seed = 7;

    void validate() const;
};

struct EnsembleResult
{
    double enhancement = 0.0;       // detected ZPL intensity, cavity on over off
    double total_rate_ratio = 0.0;  // mean total decay rate, on over off
    double standard_error = 0.0;    // of the enhancement estimate
    double mean_weight = 0.0;       // mean effective mode coupling in [0, 1]
    int samples = 0;
    int rejected = 0;               // draws that missed the diamond
};

// Monte Carlo average over emitters distributed through the membrane under a
// Gaussian detection spot, each coupled to the mode by its local field
EnsembleResult ensemble_enhancement(const ModeField& field, const EpsilonGrid& grid,
                                    const EnsembleParams& params);

} // namespace phc
