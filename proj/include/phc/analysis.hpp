#pragma once

#include "phc/fdtd.hpp"
#include "phc/grid.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace phc
{

struct Spectrum
{
    std::vector<double> wavelength;  // nm
    std::vector<double> power;       // arbitrary units
};

enum class SpectrumWindow { rectangular, hann };

// windowed discrete Fourier power of a time series evaluated on a uniform
// wavelength grid
Spectrum compute_spectrum(const std::vector<double>& samples, double dt, double lambda_min,
                          double lambda_max, int points,
                          SpectrumWindow window = SpectrumWindow::hann);

struct ExtractedMode
{
    double wavelength = 0.0;  // nm
    double q = 0.0;
    double amplitude = 0.0;
    double phase = 0.0;
    double omega = 0.0;  // rad/nm
    double decay = 0.0;  // amplitude decay rate, 1/nm
};

struct PencilReport
{
    int samples_used = 0;
    int decimation = 1;
    int model_order = 0;
    int kept_modes = 0;
    double sv_ratio = 0.0;   // smallest kept singular value over the largest
    double residual = 0.0;   // relative fit residual on the decimated series
    bool ill_conditioned = false;
};

struct PencilOptions
{
    int max_modes = 8;
    double band_min = 0.0;  // nm, 0 disables the band filter
    double band_max = std::numeric_limits<double>::infinity();
    double sv_threshold = 1e-3;  // singular values below this fraction of the largest are noise
    int target_samples = 1600;   // decimation aims at this series length
    double min_q = 5.0;          // overdamped artefacts below this are dropped
};

struct ModeExtraction
{
    std::vector<ExtractedMode> modes;  // sorted by ascending wavelength
    PencilReport report;
};

// damped-sinusoid decomposition of a ring-down series by the matrix-pencil
// method; never returns more than max_modes entries
ModeExtraction extract_modes(const std::vector<double>& ringdown, double dt,
                             const PencilOptions& options);

// q = lambda / delta_lambda for a resolved linewidth
double quality_factor(double lambda_c, double delta_lambda);

// mode volume in units of (lambda/n)^3 from a cell-centred field pattern and
// the permittivity grid it was computed on
double mode_volume(const ModeField& field, const EpsilonGrid& grid, double refractive_index);

enum class Parity { even, odd, indeterminate };

struct ParityResult
{
    Parity parity = Parity::indeterminate;
    int dominant_axis = 1;  // in-plane polarisation, 0 = x, 1 = y
    double overlap = 0.0;   // signed mirror overlap in [-1, 1]
};

// parity of the mode under the y mirror, taken from the run sector when the
// field is mirror-reduced and measured from the field otherwise
ParityResult classify_parity(const ModeField& field);

// removes spectral cross-talk between fields accumulated over one shared
// window: with every mode's frequency and decay rate known, the leakage of
// each ring-down into each accumulator is a closed-form geometric sum, so the
// pure mode patterns follow from one small linear solve per cell; quality
// factors arrive in field order
void demix_mode_fields(std::vector<ModeField>& fields, const std::vector<double>& qs);

struct ResonantMode
{
    std::string label;  // e1, e2, ... o1, o2, ... by descending wavelength
    double wavelength = 0.0;
    double q = 0.0;
    double amplitude = 0.0;
    Parity parity = Parity::indeterminate;
    int polarization_axis = 1;
    std::optional<double> volume;  // (lambda/n)^3 units
};

// assigns e/o labels, numbering each parity class from the longest wavelength
// down; returns the list sorted by descending wavelength
std::vector<ResonantMode> label_modes(std::vector<ResonantMode> modes);

} // namespace phc
