#pragma once

#include "phc/grid.hpp"

#include <array>
#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace phc
{

// mirror condition on the low face of an axis, named by the parity of the
// electric-field component normal to that plane; 'even' behaves as an
// electric wall, 'odd' as a magnetic wall
enum class Mirror { none, even, odd };

// closed-box wall used on faces without an absorbing layer
enum class WallKind { pec, pmc };

struct PmlParams
{
    int layers = 12;
    int order = 3;
    double sigma_scale = 1.0;  // multiplies the graded conductivity strength
    double alpha = 0.0;        // complex-frequency-shift term, 1/nm
};

struct PulseSpec
{
    double wavelength = 780.0;         // nm, carrier
    double fractional_bandwidth = 0.2; // power-spectrum FWHM over carrier frequency
    double amplitude = 1.0;
};

struct DipoleSource
{
    std::array<double, 3> position { 0.0, 0.0, 0.0 };
    int axis = 1;  // driven E component: 0 = x, 1 = y, 2 = z
    PulseSpec pulse;
};

// uniform current sheet spanning the whole plane normal_axis = position;
// drives a normally incident plane wave
struct PlaneSource
{
    int normal_axis = 0;
    double position = 0.0;
    int field_axis = 1;
    PulseSpec pulse;
};

struct FieldProbe
{
    std::array<double, 3> position { 0.0, 0.0, 0.0 };
    int axis = 1;
};

struct SimConfig
{
    double courant = 0.5;
    PmlParams pml;
    std::array<Mirror, 3> symmetry { Mirror::none, Mirror::none, Mirror::none };
    std::array<bool, 3> absorb { true, true, true };  // absorbing boundary per axis
    std::array<WallKind, 3> wall { WallKind::pec, WallKind::pec, WallKind::pec };
    std::vector<DipoleSource> sources;
    std::vector<PlaneSource> plane_sources;
    std::vector<FieldProbe> probes;
};

struct ProbeSeries
{
    double dt = 0.0;          // nm of optical path per step
    int ringdown_start = 0;   // first sample index after every source has switched off
    std::vector<FieldProbe> probes;
    std::vector<std::vector<double>> samples;  // [probe][step]

    double time_fs(int n) const;
    std::vector<double> ringdown(int probe) const;
};

// cell-centred complex field pattern accumulated at one wavelength over the
// stored (possibly mirror-reduced) domain
struct ModeField
{
    double wavelength = 0.0;
    double dx = 0.0;
    int nx = 0;
    int ny = 0;
    int nz = 0;
    std::array<Mirror, 3> symmetry { Mirror::none, Mirror::none, Mirror::none };
    // accumulation window: sample times are start_time + m * dt, m < steps
    double dt = 0.0;
    long steps = 0;
    double start_time = 0.0;
    std::vector<std::complex<double>> ex, ey, ez;

    std::size_t index(int i, int j, int k) const
    {
        return (static_cast<std::size_t>(i) * ny + j) * nz + k;
    }
    // centre coordinate of stored cell i along an axis, honouring the offset
    // of mirror-reduced axes
    double center(int axis, int i) const;
    double energy_density(std::size_t idx, double eps) const;
};

struct FieldSnapshot
{
    int axis = 0;
    bool magnetic = false;
    int step = 0;
    double dt = 0.0;
    double dx = 0.0;
    int nx = 0;
    int ny = 0;
    int nz = 0;  // node dimensions of the stored component
    std::vector<double> values;
};

class SimState
{
public:
    SimState(const EpsilonGrid& grid, const SimConfig& config);
    ~SimState();
    SimState(SimState&&) noexcept;
    SimState& operator=(SimState&&) noexcept;
    SimState(const SimState&) = delete;
    SimState& operator=(const SimState&) = delete;

    void step();
    int step_index() const;
    double dt() const;
    double time() const;  // of the stored E field, nm of optical path

    // exactly conserved in a closed lossless box; includes mirror doubling
    double total_energy() const;

    double source_off_time() const;
    bool sources_active() const;

    const ProbeSeries& probes() const;

    // starts per-wavelength field accumulation from the current step onward
    void enable_dft(const std::vector<double>& wavelengths);
    ModeField mode_field(std::size_t which) const;

    FieldSnapshot snapshot(int axis, bool magnetic = false) const;

    std::array<int, 3> stored_cells() const;
    std::array<Mirror, 3> symmetry() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct RunOptions
{
    // ring-down length after the sources stop, in periods of the longest
    // source carrier wavelength
    double ringdown_periods = 400.0;
    std::vector<double> dft_wavelengths;
    std::function<void(SimState&)> on_step;
};

struct RunResult
{
    ProbeSeries probes;
    std::vector<ModeField> fields;
    int steps = 0;
};

// drives the sources to completion, then rings down while recording probes
// and, when requested, accumulating mode fields
RunResult run_to_spectrum(const EpsilonGrid& grid, const SimConfig& config,
                          const RunOptions& options);

} // namespace phc
