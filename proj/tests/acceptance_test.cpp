#include "phc/pipeline.hpp"
#include "phc/rng.hpp"
#include "phc/units.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace phc;

namespace
{

int failed_criteria = 0;

void criterion(int id, const std::string& summary, bool ok, const std::string& detail)
{
    std::printf("[%s] criterion %2d: %s -- %s\n", ok ? "PASS" : "FAIL", id, summary.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok)
    {
        ++failed_criteria;
    }
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt_time(double s)
{
    std::ostringstream out;
    out << std::fixed << std::setprecision(1);
    if (s < 120.0)
    {
        out << s << " s";
    }
    else
    {
        out << s / 60.0 << " min";
    }
    return out.str();
}

// fundamental-mode artifacts of the coarse vertical M7 solve, reused by the
// tilt, ensemble and mask round-trip criteria
struct M7Baseline
{
    bool valid = false;
    double lambda = 0.0;
    double q = 0.0;
    ModeField field;
    EpsilonGrid grid;
    M7Params params;
    SimSettings sim;
};

int find_field(const SolveOutput& out, const std::string& label)
{
    for (std::size_t i = 0; i < out.field_labels.size(); ++i)
    {
        if (out.field_labels[i] == label)
        {
            return static_cast<int>(i);
        }
    }
    return -1;
}

const ResonantMode* find_mode(const std::vector<ResonantMode>& modes, const std::string& label)
{
    for (const ResonantMode& mode : modes)
    {
        if (mode.label == label)
        {
            return &mode;
        }
    }
    return nullptr;
}

// ---------------------------------------------------------------------------
// criterion 1: closed-form enhancement figures

void criterion_1()
{
    const auto start = Clock::now();
    const double f_ideal = ideal_purcell(400.0, 1.5);
    const EmitterRates rates = single_emitter_rates(20.0, BranchingRatios {});

    bool ok = std::abs(f_ideal - 20.26) <= 0.01;
    ok = ok && std::abs(rates.total_rate - 1.76) <= 0.005;
    ok = ok && std::abs(rates.zpl_fraction - 0.455) <= 0.005;
    ok = ok && std::abs(rates.efficiency_gain - 9.2) <= 0.005;
    ok = ok && seconds_since(start) < 1.0;

    std::ostringstream detail;
    detail << std::fixed << std::setprecision(3) << "F_c(400, 1.5) = " << f_ideal
           << ", rates at F=20: total x" << rates.total_rate << ", ZPL fraction "
           << rates.zpl_fraction << ", efficiency x" << rates.efficiency_gain;
    criterion(1, "closed-form Purcell figures", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 2: damped-tone recovery from noisy records

std::vector<double> noisy_tone(double wavelength, double q, double dt, double duration,
                               std::uint64_t seed)
{
    const double omega = 2.0 * units::pi / wavelength;
    const double decay = omega / (2.0 * q);
    const std::size_t n = static_cast<std::size_t>(duration / dt);
    Rng rng(seed);
    std::vector<double> series(n);
    for (std::size_t i = 0; i < n; ++i)
    {
        const double t = static_cast<double>(i) * dt;
        series[i] = std::exp(-decay * t) * std::cos(omega * t + 0.7) + 0.05 * rng.normal();
    }
    return series;
}

bool recover_tone(double wavelength, double q, double dt, double duration, double q_rel_tol,
                  std::uint64_t seed, std::ostringstream& detail)
{
    const std::vector<double> series = noisy_tone(wavelength, q, dt, duration, seed);
    PencilOptions options;
    options.band_min = wavelength - 25.0;
    options.band_max = wavelength + 25.0;
    options.max_modes = 4;
    const ModeExtraction extraction = extract_modes(series, dt, options);
    if (extraction.modes.empty())
    {
        detail << " Q=" << q << ": no mode found;";
        return false;
    }
    const ExtractedMode* best = &extraction.modes.front();
    for (const ExtractedMode& mode : extraction.modes)
    {
        if (std::abs(mode.wavelength - wavelength) < std::abs(best->wavelength - wavelength))
        {
            best = &mode;
        }
    }
    const double lambda_err = std::abs(best->wavelength - wavelength);
    const double q_err = std::abs(best->q / q - 1.0);
    detail << " Q=" << q << ": dl " << std::setprecision(4) << lambda_err << " nm, dQ/Q "
           << std::setprecision(3) << q_err << ";";
    return lambda_err < 0.1 && q_err < q_rel_tol;
}

void criterion_2()
{
    const auto start = Clock::now();
    std::ostringstream detail;
    detail << std::fixed;

    bool ok = recover_tone(738.0, 100.0, 5.0, 95000.0, 0.05, 101, detail);
    ok = recover_tone(780.0, 400.0, 5.0, 300000.0, 0.05, 102, detail) && ok;
    const double tau = 5e5 * 738.0 / units::pi;
    ok = recover_tone(738.0, 5e5, 20.0, -std::log(0.9) * tau, 0.20, 103, detail) && ok;

    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 60.0;
    detail << " " << fmt_time(elapsed);
    criterion(2, "noisy ring-down tone recovery", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 3: solver physics suite

EpsilonGrid air_grid(int nx, int ny, int nz, double dx)
{
    EpsilonGrid grid;
    grid.dx = dx;
    grid.nx = nx;
    grid.ny = ny;
    grid.nz = nz;
    grid.eps.assign(grid.cell_count(), 1.0);
    return grid;
}

EpsilonGrid block_grid()
{
    EpsilonGrid grid = air_grid(40, 40, 32, 10.0);
    for (int i = 13; i < 27; ++i)
    {
        for (int j = 13; j < 27; ++j)
        {
            for (int k = 12; k < 20; ++k)
            {
                grid.at(i, j, k) = 5.76;
            }
        }
    }
    return grid;
}

void criterion_3()
{
    const auto start = Clock::now();
    std::ostringstream detail;
    bool ok = true;

    // energy conservation in a closed lossless box across >= 1e4 steps, and
    // bitwise-identical probes when the worker count changes
    {
        const EpsilonGrid grid = air_grid(24, 24, 24, 10.0);
        SimConfig config;
        config.absorb = { false, false, false };
        config.pml.layers = 0;
        DipoleSource source;
        source.position = { 5.0, 5.0, 5.0 };
        source.pulse.wavelength = 780.0;
        source.pulse.fractional_bandwidth = 0.5;
        config.sources.push_back(source);
        config.probes.push_back(FieldProbe { { 45.0, 5.0, 5.0 }, 1 });

        RunOptions options;
        options.ringdown_periods = 66.0;
        std::vector<double> energies;
        options.on_step = [&](SimState& state) { energies.push_back(state.total_energy()); };
        const RunResult first = run_to_spectrum(grid, config, options);

        double drift = 0.0;
        for (double e : energies)
        {
            drift = std::max(drift, std::abs(e - energies.front()) / energies.front());
        }
        ok = ok && energies.size() >= 10000 && energies.front() > 0.0 && drift < 1e-6;
        detail << std::scientific << std::setprecision(2) << "energy drift " << drift << " over "
               << energies.size() << " steps";

        options.on_step = nullptr;
#ifdef _OPENMP
        omp_set_num_threads(2);
#endif
        const RunResult second = run_to_spectrum(grid, config, options);
#ifdef _OPENMP
        omp_set_num_threads(1);
#endif
        const bool bitwise = first.probes.samples == second.probes.samples;
        ok = ok && bitwise;
        detail << ", threads " << (bitwise ? "bitwise-equal" : "DIVERGED");
    }

    // absorbing-boundary reflection on a plane-wave lane
    {
        const EpsilonGrid grid = air_grid(1600, 8, 8, 10.0);
        SimConfig config;
        config.absorb = { true, false, false };
        config.wall = { WallKind::pec, WallKind::pec, WallKind::pmc };
        PlaneSource sheet;
        sheet.normal_axis = 0;
        sheet.position = -6000.0;
        sheet.field_axis = 1;
        sheet.pulse.wavelength = 780.0;
        sheet.pulse.fractional_bandwidth = 0.8;
        config.plane_sources.push_back(sheet);
        config.probes.push_back(FieldProbe { { 4000.0, 5.0, 5.0 }, 1 });

        RunOptions options;
        options.ringdown_periods = 26.0;
        const RunResult result = run_to_spectrum(grid, config, options);
        const std::vector<double>& series = result.probes.samples[0];
        double incident = 0.0;
        double reflected = 0.0;
        for (std::size_t n = 0; n < series.size(); ++n)
        {
            incident = std::max(incident, std::abs(series[n]));
            if (static_cast<double>(n) * result.probes.dt > 14500.0)
            {
                reflected = std::max(reflected, std::abs(series[n]));
            }
        }
        ok = ok && incident > 0.0 && reflected < 1e-4 * incident;
        detail << ", PML reflection " << std::scientific << std::setprecision(2)
               << reflected / incident;
    }

    // half-domain mirror runs against explicit image sources
    {
        const EpsilonGrid grid = block_grid();
        struct MirrorCase
        {
            int axis;
            Mirror mirror;
            double image_sign;
        };
        const MirrorCase cases[] = {
            { 1, Mirror::even, 1.0 },
            { 2, Mirror::odd, 1.0 },
        };
        double worst_rel = 0.0;
        for (const MirrorCase& mc : cases)
        {
            DipoleSource source;
            source.position = { 5.0, 5.0, 10.0 };
            source.axis = 1;
            source.pulse.wavelength = 780.0;
            source.pulse.fractional_bandwidth = 0.5;
            DipoleSource image = source;
            image.position[mc.axis] = -source.position[mc.axis];
            image.pulse.amplitude = mc.image_sign;
            const FieldProbe probe { { 15.0, 15.0, 10.0 }, 1 };

            SimConfig full;
            full.sources = { source, image };
            full.probes = { probe };
            SimConfig half;
            half.symmetry[mc.axis] = mc.mirror;
            half.sources = { source };
            half.probes = { probe };

            RunOptions options;
            options.ringdown_periods = 3.0;
            const RunResult full_run = run_to_spectrum(grid, full, options);
            const RunResult half_run = run_to_spectrum(grid, half, options);

            const std::vector<double>& a = full_run.probes.samples[0];
            const std::vector<double>& b = half_run.probes.samples[0];
            double peak = 0.0;
            for (double v : a)
            {
                peak = std::max(peak, std::abs(v));
            }
            double diff = 0.0;
            for (std::size_t n = 0; n < std::min(a.size(), b.size()); ++n)
            {
                diff = std::max(diff, std::abs(a[n] - b[n]));
            }
            worst_rel = std::max(worst_rel, peak > 0.0 ? diff / peak : 1.0);
        }
        ok = ok && worst_rel < 1e-6;
        detail << ", mirror mismatch " << std::scientific << std::setprecision(2) << worst_rel;
    }

    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 600.0;
    detail << ", " << fmt_time(elapsed);
    criterion(3, "FDTD physics suite", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 4: coarse M7 spectrum in quarter-domain symmetry

void criterion_4(M7Baseline& base)
{
    const auto start = Clock::now();

    M7Params m7;
    m7.rings = 4;
    DesignSpec design;
    design.cavity.params = m7;

    SimSettings sim;  // dx 0 resolves to a/16; sectors even+odd, vertical mirror
    sim.ringdown_periods = 300.0;
    sim.dft_periods = 100.0;

    AnalysisSettings analysis;
    analysis.band_min = 700.0;
    analysis.band_max = 840.0;
    analysis.max_modes = 5;
    analysis.amplitude_floor = 0.02;
    analysis.mode_fields = true;

    SolveOutput out = solve_design(design, sim, analysis);

    std::ostringstream detail;
    detail << std::fixed << std::setprecision(1) << out.modes.size() << " modes in band:";
    for (const ResonantMode& mode : out.modes)
    {
        detail << " " << mode.label << "@" << mode.wavelength;
    }

    bool ok = out.modes.size() >= 5;

    const int five = std::min<int>(5, static_cast<int>(out.modes.size()));
    int even_count = 0;
    int odd_count = 0;
    bool mapping = five > 0;
    for (int i = 0; i < five; ++i)
    {
        const ResonantMode& mode = out.modes[i];
        if (mode.parity == Parity::even)
        {
            ++even_count;
        }
        else if (mode.parity == Parity::odd)
        {
            ++odd_count;
        }
        const int idx = find_field(out, mode.label);
        if (idx < 0)
        {
            mapping = false;
            continue;
        }
        const ParityResult measured = classify_parity(out.fields[idx]);
        const int expected_axis = mode.parity == Parity::even ? 1 : 0;
        mapping = mapping && measured.dominant_axis == expected_axis
                  && mode.polarization_axis == expected_axis;
    }
    ok = ok && even_count >= 3 && odd_count >= 2 && mapping;
    detail << "; among five longest " << even_count << " even / " << odd_count << " odd, polarization "
           << (mapping ? "even->y, odd->x" : "MISMATCHED");

    const ResonantMode* e1 = find_mode(out.modes, "e1");
    if (e1 != nullptr && e1->volume.has_value())
    {
        const double volume = *e1->volume;
        ok = ok && volume >= 1.0 && volume <= 2.0;
        detail << "; e1 " << std::setprecision(2) << e1->wavelength << " nm, Q "
               << std::setprecision(0) << e1->q << ", V " << std::setprecision(2) << volume
               << " (l/n)^3";
    }
    else
    {
        ok = false;
        detail << "; fundamental even mode missing";
    }

    const int field_idx = e1 != nullptr ? find_field(out, "e1") : -1;
    if (e1 != nullptr && field_idx >= 0)
    {
        base.valid = true;
        base.lambda = e1->wavelength;
        base.q = e1->q;
        base.field = std::move(out.fields[field_idx]);
        base.grid = std::move(out.grid);
        base.params = m7;
        base.sim = sim;
    }

    detail << "; " << fmt_time(seconds_since(start));
    criterion(4, "M7 quarter-domain spectrum", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 5: sidewall tilt degrades the fundamental quality factor

void criterion_5(const M7Baseline& base)
{
    if (!base.valid)
    {
        criterion(5, "6-degree tilt degrades fundamental Q", false,
                  "vertical baseline unavailable");
        return;
    }
    const auto start = Clock::now();

    M7Params tilted = base.params;
    tilted.tilt_deg = 6.0;
    DesignSpec design;
    design.cavity.params = tilted;

    SimSettings sim = base.sim;
    sim.symmetry_z = Mirror::none;  // cone sidewalls break the vertical mirror
    sim.sectors = { Mirror::even };
    sim.ringdown_periods = 250.0;

    AnalysisSettings analysis;
    analysis.band_min = 700.0;
    analysis.band_max = 860.0;
    analysis.max_modes = 5;
    analysis.mode_fields = false;

    const std::vector<ResonantMode> modes = solve_design(design, sim, analysis).modes;
    const ResonantMode* e1 = find_mode(modes, "e1");

    std::ostringstream detail;
    detail << std::fixed << std::setprecision(0);
    bool ok = false;
    if (e1 == nullptr)
    {
        detail << "no even mode in the tilted spectrum";
    }
    else
    {
        const double ratio = base.q / e1->q;
        ok = ratio >= 3.0;
        detail << "Q " << base.q << " vertical vs " << e1->q << " tilted, factor "
               << std::setprecision(1) << ratio;
    }
    detail << "; " << fmt_time(seconds_since(start));
    criterion(5, "6-degree tilt degrades fundamental Q", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 6: nanobeam spectrum without an imposed in-plane mirror

void criterion_6()
{
    const auto start = Clock::now();

    DesignSpec design;
    design.cavity.params = NanobeamParams {};

    SimSettings sim;
    sim.wavelength = 625.0;
    sim.margin_y = 550.0;
    sim.sectors = { Mirror::none };
    sim.ringdown_periods = 300.0;
    sim.dft_periods = 100.0;

    AnalysisSettings analysis;
    analysis.band_min = 600.0;
    analysis.band_max = 650.0;
    analysis.max_modes = 4;
    analysis.amplitude_floor = 0.05;
    analysis.mode_fields = true;

    const SolveOutput out = solve_design(design, sim, analysis);

    std::ostringstream detail;
    detail << std::fixed << std::setprecision(1) << out.modes.size() << " dominant modes:";
    bool all_even_y = !out.modes.empty();
    double min_overlap = 1.0;
    for (const ResonantMode& mode : out.modes)
    {
        detail << " " << mode.label << "@" << mode.wavelength;
        all_even_y = all_even_y && mode.parity == Parity::even && mode.polarization_axis == 1;
    }
    for (const ModeField& field : out.fields)
    {
        min_overlap = std::min(min_overlap, classify_parity(field).overlap);
    }
    const bool ok = out.modes.size() == 3 && all_even_y;
    detail << "; " << (all_even_y ? "all even / y-polarized" : "parity or polarization OFF")
           << ", weakest mirror overlap " << std::setprecision(2) << min_overlap << "; "
           << fmt_time(seconds_since(start));
    criterion(6, "nanobeam three-mode spectrum", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 7: radius sensitivity and digital-etch tuning

bool monotone_blue(const TuningTrace& trace, std::ostringstream& detail)
{
    bool ok = true;
    for (const std::string& label : trace.labels())
    {
        const std::vector<TracePoint> track = trace.track(label);
        for (std::size_t i = 1; i < track.size(); ++i)
        {
            if (!(track[i].wavelength < track[i - 1].wavelength))
            {
                detail << " " << label << " not monotone at step " << track[i].step << ";";
                ok = false;
            }
        }
    }
    return ok;
}

void criterion_7()
{
    const auto start = Clock::now();
    std::ostringstream detail;
    detail << std::fixed << std::setprecision(1);
    bool ok = true;

    CavityDesign m7_design;
    M7Params m7;
    m7.rings = 4;
    m7_design.params = m7;

    SimSettings m7_sim;
    m7_sim.dx = 275.0 / 12.0;
    m7_sim.ringdown_periods = 150.0;
    AnalysisSettings m7_analysis;
    m7_analysis.band_min = 660.0;
    m7_analysis.band_max = 850.0;
    m7_analysis.max_modes = 5;
    const SpectrumSolver m7_solver = make_fdtd_solver(m7_sim, m7_analysis);

    const SensitivityReport sens = sensitivity(m7_design, TuneParameter::all_radii, 1.5, m7_solver);
    const double mean_shift = -sens.mean_slope() * 1.5;
    ok = ok && mean_shift >= 1.5 && mean_shift <= 4.5;
    detail << "+1.5 nm radii: mean blue shift " << mean_shift << " nm over "
           << sens.shifts.size() << " modes;";

    const TuningTrace m7_trace = etch_sequence(m7_design, EtchStep { 1.5 }, 5, m7_solver);
    const std::vector<TracePoint> m7_e1 = m7_trace.track("e1");
    if (m7_e1.size() != 6)
    {
        ok = false;
        detail << " M7 e1 tracked for only " << m7_e1.size() << " of 6 steps;";
    }
    else
    {
        const double total = m7_e1.front().wavelength - m7_e1.back().wavelength;
        const double q_change = std::abs(m7_e1.back().q - m7_e1.front().q) / m7_e1.front().q;
        ok = ok && total >= 10.0 && total <= 20.0 && q_change < 0.5;
        detail << " M7 etch total " << total << " nm, e1 Q change " << std::setprecision(0)
               << q_change * 100.0 << "%;" << std::setprecision(1);
    }
    ok = monotone_blue(m7_trace, detail) && ok;

    CavityDesign beam_design;
    beam_design.params = NanobeamParams {};

    SimSettings beam_sim;
    beam_sim.dx = 200.0 / 12.0;
    beam_sim.wavelength = 625.0;
    beam_sim.margin_y = 550.0;
    beam_sim.sectors = { Mirror::even };
    beam_sim.ringdown_periods = 150.0;
    AnalysisSettings beam_analysis;
    beam_analysis.band_min = 575.0;
    beam_analysis.band_max = 655.0;
    beam_analysis.max_modes = 4;
    const SpectrumSolver beam_solver = make_fdtd_solver(beam_sim, beam_analysis);

    const TuningTrace beam_trace = etch_sequence(beam_design, EtchStep { 1.5 }, 5, beam_solver);
    const std::vector<TracePoint> beam_e1 = beam_trace.track("e1");
    if (beam_e1.size() != 6)
    {
        ok = false;
        detail << " beam e1 tracked for only " << beam_e1.size() << " of 6 steps;";
    }
    else
    {
        const double total = beam_e1.front().wavelength - beam_e1.back().wavelength;
        const double q_change = std::abs(beam_e1.back().q - beam_e1.front().q) / beam_e1.front().q;
        ok = ok && total >= 9.0 && total <= 19.0 && q_change < 0.5;
        detail << " beam etch total " << total << " nm, e1 Q change " << std::setprecision(0)
               << q_change * 100.0 << "%;" << std::setprecision(1);
    }
    ok = monotone_blue(beam_trace, detail) && ok;

    detail << " " << fmt_time(seconds_since(start));
    criterion(7, "etch tuning slopes and traces", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 8: ensemble enhancement over the fundamental mode pattern

void criterion_8(const M7Baseline& base)
{
    if (!base.valid)
    {
        criterion(8, "ensemble ZPL enhancement", false, "fundamental mode field unavailable");
        return;
    }
    const auto start = Clock::now();

    const EnsembleParams params;  // Q 400, V 1.5, 2 nm lines, unit suppression/collection
    const EnsembleResult result = ensemble_enhancement(base.field, base.grid, params);

    const bool ok = result.enhancement >= 2.0 && result.enhancement <= 4.0
                    && std::abs(result.total_rate_ratio - 1.0) < 0.10
                    && result.standard_error > 0.0
                    && result.standard_error < 0.05 * result.enhancement;

    std::ostringstream detail;
    detail << std::fixed << std::setprecision(2) << "enhancement x" << result.enhancement
           << " +- " << result.standard_error << " (" << result.samples << " samples, "
           << result.rejected << " rejected), total rate x" << std::setprecision(3)
           << result.total_rate_ratio << ", mean coupling " << std::setprecision(3)
           << result.mean_weight << "; " << fmt_time(seconds_since(start));
    criterion(8, "ensemble ZPL enhancement", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 9: geometry suite

void criterion_9()
{
    const auto start = Clock::now();
    std::ostringstream detail;
    bool ok = true;

    UnitCell triangular;
    triangular.kind = UnitCell::Kind::triangular;
    triangular.pitch = 275.0;
    UnitCell rectangular;
    rectangular.kind = UnitCell::Kind::rectangular;
    rectangular.pitch = 200.0;
    rectangular.width = 300.0;

    const double ff_m7 = filling_factor(0.31 * 275.0, triangular);
    const double ff_center = filling_factor(84.0, rectangular);
    const double ff_edge = filling_factor(74.0, rectangular);
    ok = ok && std::abs(ff_m7 - 0.3486) <= 5e-5 && std::abs(ff_center - 0.3695) <= 5e-5
         && std::abs(ff_edge - 0.2867) <= 5e-5;
    detail << std::fixed << std::setprecision(4) << "FF " << ff_m7 << " / " << ff_center << " / "
           << ff_edge;

    // rasterized fill factor approaches the analytic value under refinement
    DielectricStructure two_holes;
    two_holes.slab.size_x = 800.0;
    two_holes.slab.size_y = 300.0;
    two_holes.slab.size_z = 300.0;
    two_holes.holes.push_back(HoleCone { -100.0, 0.0, 84.0, 84.0 });
    two_holes.holes.push_back(HoleCone { 100.0, 0.0, 84.0, 84.0 });
    const auto raster_ff = [&](double dx)
    {
        const EpsilonGrid grid = rasterize(two_holes, dx, 0.0);
        const double eps_solid = two_holes.material.eps();
        double air_volume = 0.0;
        for (double e : grid.eps)
        {
            air_volume += (eps_solid - e) / (eps_solid - 1.0);
        }
        air_volume *= dx * dx * dx;
        return air_volume / (2.0 * 200.0 * 300.0 * 300.0);
    };
    const double err_coarse = std::abs(raster_ff(12.5) - ff_center);
    const double err_fine = std::abs(raster_ff(6.25) - ff_center);
    ok = ok && err_fine < err_coarse && err_fine < 2e-3;
    detail << std::scientific << std::setprecision(2) << ", raster FF error " << err_coarse
           << " -> " << err_fine;

    // disorder sampler statistics over a large synthetic lattice
    DielectricStructure lattice;
    lattice.slab.size_x = 31000.0;
    lattice.slab.size_y = 16000.0;
    lattice.slab.size_z = 300.0;
    for (int i = 0; i < 100; ++i)
    {
        for (int j = 0; j < 50; ++j)
        {
            lattice.holes.push_back(
                HoleCone { (i - 49.5) * 300.0, (j - 24.5) * 300.0, 85.0, 85.0 });
        }
    }
    PerturbParams jitter;
    jitter.position_jitter = 13.0;
    jitter.radius_jitter = 6.0;
    jitter.seed = 11;
    PerturbStats stats;
    const DielectricStructure shaken = perturb(lattice, jitter, &stats);
    double mean_disp = 0.0;
    double mean_dr = 0.0;
    for (std::size_t h = 0; h < lattice.holes.size(); ++h)
    {
        mean_disp += std::hypot(shaken.holes[h].x - lattice.holes[h].x,
                                shaken.holes[h].y - lattice.holes[h].y);
        mean_dr += std::abs(shaken.holes[h].radius_top - lattice.holes[h].radius_top);
    }
    mean_disp /= static_cast<double>(lattice.holes.size());
    mean_dr /= static_cast<double>(lattice.holes.size());
    ok = ok && std::abs(mean_disp - 13.0) <= 0.5 && std::abs(mean_dr - 6.0) <= 0.3
         && stats.clamped_radii == 0;
    detail << std::fixed << std::setprecision(2) << ", disorder means " << mean_disp << " / "
           << mean_dr << " nm over " << lattice.holes.size() << " holes";

    const double elapsed = seconds_since(start);
    ok = ok && elapsed < 60.0;
    detail << "; " << fmt_time(elapsed);
    criterion(9, "geometry suite", ok, detail.str());
}

// ---------------------------------------------------------------------------
// criterion 10: mask-import round trip

void criterion_10(const M7Baseline& base, const std::string& dir)
{
    if (!base.valid)
    {
        criterion(10, "mask-import round trip", false, "parametric baseline unavailable");
        return;
    }
    const auto start = Clock::now();

    DesignSpec parametric;
    parametric.cavity.params = base.params;
    const GrayImage image = render_top_view(parametric.build(), 2.0);
    const std::string mask_path = dir + "/m7_top_view.png";
    write_png_gray(mask_path, image);

    DesignSpec mask_design;
    mask_design.mask_path = mask_path;
    mask_design.mask_options.pixel_pitch = 2.0;
    mask_design.mask_options.threshold = 0.5;
    mask_design.mask_options.thickness = base.params.thickness;
    mask_design.mask_pitch = base.params.lattice_constant;

    SimSettings sim = base.sim;
    sim.sectors = { Mirror::even };
    sim.ringdown_periods = 150.0;

    AnalysisSettings analysis;
    analysis.band_min = 700.0;
    analysis.band_max = 840.0;
    analysis.max_modes = 5;
    analysis.mode_fields = false;

    const std::vector<ResonantMode> modes = solve_design(mask_design, sim, analysis).modes;
    const ResonantMode* e1 = find_mode(modes, "e1");

    std::ostringstream detail;
    detail << std::fixed << std::setprecision(2);
    bool ok = false;
    if (e1 == nullptr)
    {
        detail << "no even mode from the imported mask";
    }
    else
    {
        const double allowance = 2.0 * base.lambda / base.q;
        const double difference = std::abs(e1->wavelength - base.lambda);
        ok = difference <= allowance;
        detail << "parametric " << base.lambda << " nm vs imported " << e1->wavelength
               << " nm, off by " << difference << " nm (allowed " << allowance << ")";
    }
    detail << "; " << fmt_time(seconds_since(start));
    criterion(10, "mask-import round trip", ok, detail.str());
}

} // namespace

int main()
{
    std::printf("photonic-crystal cavity toolkit: acceptance run\n");
    const std::string dir =
        (std::filesystem::temp_directory_path() / "phc_acceptance").string();
    std::filesystem::create_directories(dir);

    M7Baseline base;
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4(base);
    criterion_5(base);
    criterion_6();
    criterion_7();
    criterion_8(base);
    criterion_9();
    criterion_10(base, dir);

    std::printf("%d of 10 criteria passed\n", 10 - failed_criteria);
    return failed_criteria == 0 ? 0 : 1;
}
