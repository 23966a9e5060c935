#include "phc/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "phc/units.hpp"

namespace phc
{

namespace
{

namespace fs = std::filesystem;

void require(bool ok, const std::string& message)
{
    if (!ok)
    {
        throw std::invalid_argument(message);
    }
}

Mirror parse_mirror(const std::string& text, const std::string& what)
{
    if (text == "none")
    {
        return Mirror::none;
    }
    if (text == "even")
    {
        return Mirror::even;
    }
    if (text == "odd")
    {
        return Mirror::odd;
    }
    throw std::invalid_argument(what + " must be none, even or odd, not '" + text + "'");
}

std::vector<Mirror> parse_sectors(const std::string& text)
{
    std::vector<Mirror> sectors;
    std::size_t start = 0;
    while (start <= text.size())
    {
        std::size_t end = text.find(',', start);
        if (end == std::string::npos)
        {
            end = text.size();
        }
        std::string item = text.substr(start, end - start);
        item.erase(std::remove_if(item.begin(), item.end(),
                                  [](unsigned char c) { return std::isspace(c); }),
                   item.end());
        if (!item.empty())
        {
            sectors.push_back(parse_mirror(item, "config [simulation].sectors entry"));
        }
        start = end + 1;
    }
    require(!sectors.empty(), "config [simulation].sectors must list at least one sector");
    return sectors;
}

std::string resolve_path(const std::string& base_dir, const std::string& path)
{
    if (path.empty() || fs::path(path).is_absolute() || base_dir.empty())
    {
        return path;
    }
    return (fs::path(base_dir) / path).lexically_normal().string();
}

std::vector<LoadedProbe> as_loaded(const ProbeSeries& series)
{
    std::vector<LoadedProbe> probes;
    for (std::size_t k = 0; k < series.samples.size(); ++k)
    {
        LoadedProbe probe;
        probe.dt = series.dt;
        probe.ringdown_start = series.ringdown_start;
        probe.probe = series.probes[k];
        probe.samples = series.samples[k];
        probes.push_back(std::move(probe));
    }
    return probes;
}

Parity sector_parity(Mirror sector)
{
    switch (sector)
    {
        case Mirror::even: return Parity::even;
        case Mirror::odd: return Parity::odd;
        default: return Parity::indeterminate;
    }
}

int parity_polarization(Parity parity, int fallback)
{
    switch (parity)
    {
        case Parity::even: return 1;
        case Parity::odd: return 0;
        default: return fallback;
    }
}

double mode_fwhm(double wavelength, double q)
{
    return q > 0.0 ? wavelength / q : 0.0;
}

} // namespace

double DesignSpec::lattice_constant() const
{
    if (uses_mask())
    {
        return mask_pitch;
    }
    if (const auto* m7 = std::get_if<M7Params>(&cavity.params))
    {
        return m7->lattice_constant;
    }
    return std::get<NanobeamParams>(cavity.params).pitch;
}

double DesignSpec::refractive_index() const
{
    return cavity.material.refractive_index;
}

DielectricStructure DesignSpec::build() const
{
    DielectricStructure structure;
    if (uses_mask())
    {
        const GrayImage image = read_png_gray(mask_path);
        structure = import_mask(image, mask_options, cavity.material);
    }
    else
    {
        structure = cavity.build();
    }
    if (position_jitter > 0.0 || radius_jitter > 0.0)
    {
        PerturbParams jitter;
        jitter.position_jitter = position_jitter;
        jitter.radius_jitter = radius_jitter;
        jitter.seed = jitter_seed;
        structure = perturb(structure, jitter);
    }
    return structure;
}

double SimSettings::resolved_dx(const DesignSpec& design) const
{
    if (dx > 0.0)
    {
        return dx;
    }
    return design.lattice_constant() / 16.0;
}

std::string sector_tag(Mirror sector)
{
    switch (sector)
    {
        case Mirror::even: return "yeven";
        case Mirror::odd: return "yodd";
        default: return "full";
    }
}

Mirror sector_from_tag(const std::string& tag)
{
    if (tag == "yeven")
    {
        return Mirror::even;
    }
    if (tag == "yodd")
    {
        return Mirror::odd;
    }
    require(tag == "full", "unknown sector tag '" + tag + "'");
    return Mirror::none;
}

EpsilonGrid rasterize_design(const DesignSpec& design, const SimSettings& sim)
{
    RasterizeOptions options;
    options.margin = { sim.margin_x, sim.margin_y, sim.margin_z };
    options.max_bytes = static_cast<std::size_t>(sim.max_memory_gb * 1e9);
    return rasterize(design.build(), sim.resolved_dx(design), options);
}

SimConfig make_sim_config(const DesignSpec& design, const SimSettings& sim, Mirror sector)
{
    SimConfig config;
    config.courant = sim.courant;
    config.pml = sim.pml;
    config.symmetry = { sim.symmetry_x, sector, sim.symmetry_z };

    PulseSpec pulse;
    pulse.wavelength = sim.wavelength;
    pulse.fractional_bandwidth = sim.bandwidth;

    const double a = design.lattice_constant();
    if (design.is_m7())
    {
        // generic points in the seven-hole defect area, clear of the mirror
        // planes and of the first hole rows
        config.sources = {
            DipoleSource { { 0.313 * a, 0.177 * a, 0.0 }, 1, pulse },
            DipoleSource { { 1.193 * a, 0.367 * a, 0.0 }, 0, pulse },
        };
        config.probes = {
            FieldProbe { { 0.531 * a, 0.211 * a, 0.0 }, 1 },
            FieldProbe { { 1.037 * a, 0.153 * a, 0.0 }, 0 },
            FieldProbe { { 2.113 * a, 0.097 * a, 0.0 }, 1 },
        };
    }
    else
    {
        const double w = std::get<NanobeamParams>(design.cavity.params).width;
        config.sources = {
            DipoleSource { { 0.1 * a, 0.3 * w, 0.0 }, 1, pulse },
        };
        config.probes = {
            FieldProbe { { 0.13 * a, 0.23 * w, 0.0 }, 1 },
            FieldProbe { { 1.11 * a, 0.17 * w, 0.0 }, 1 },
            FieldProbe { { 2.07 * a, 0.29 * w, 0.0 }, 1 },
        };
    }
    return config;
}

SectorModes merge_probe_modes(Mirror sector, const std::vector<LoadedProbe>& probes,
                              const AnalysisSettings& analysis)
{
    require(!probes.empty(), "merge_probe_modes needs at least one probe");

    PencilOptions options;
    options.max_modes = analysis.max_modes;
    options.band_min = analysis.band_min;
    options.band_max = analysis.band_max;

    SectorModes merged;
    merged.sector = sector;
    for (const LoadedProbe& probe : probes)
    {
        const ModeExtraction extraction = extract_modes(probe.ringdown(), probe.dt, options);
        merged.report.samples_used =
            std::max(merged.report.samples_used, extraction.report.samples_used);
        merged.report.model_order =
            std::max(merged.report.model_order, extraction.report.model_order);
        merged.report.ill_conditioned |= extraction.report.ill_conditioned;
        merged.report.residual = std::max(merged.report.residual, extraction.report.residual);
        for (const ExtractedMode& mode : extraction.modes)
        {
            // probes seeing the same resonance agree to far below a linewidth
            bool absorbed = false;
            for (ExtractedMode& known : merged.modes)
            {
                const double tol =
                    0.5 * std::max(mode_fwhm(known.wavelength, known.q),
                                   mode_fwhm(mode.wavelength, mode.q));
                if (std::abs(known.wavelength - mode.wavelength) <= std::max(tol, 1e-6))
                {
                    if (mode.amplitude > known.amplitude)
                    {
                        known = mode;
                    }
                    absorbed = true;
                    break;
                }
            }
            if (!absorbed)
            {
                merged.modes.push_back(mode);
            }
        }
    }

    double peak = 0.0;
    for (const ExtractedMode& mode : merged.modes)
    {
        peak = std::max(peak, mode.amplitude);
    }
    const double floor = analysis.amplitude_floor * peak;
    merged.modes.erase(std::remove_if(merged.modes.begin(), merged.modes.end(),
                                      [floor](const ExtractedMode& mode)
                                      { return mode.amplitude < floor; }),
                       merged.modes.end());

    std::sort(merged.modes.begin(), merged.modes.end(),
              [](const ExtractedMode& a, const ExtractedMode& b)
              { return a.amplitude > b.amplitude; });
    if (static_cast<int>(merged.modes.size()) > analysis.max_modes)
    {
        merged.modes.resize(static_cast<std::size_t>(analysis.max_modes));
    }
    std::sort(merged.modes.begin(), merged.modes.end(),
              [](const ExtractedMode& a, const ExtractedMode& b)
              { return a.wavelength < b.wavelength; });
    merged.report.kept_modes = static_cast<int>(merged.modes.size());
    return merged;
}

std::vector<ResonantMode> merge_sector_modes(const std::vector<SectorModes>& sectors)
{
    std::vector<ResonantMode> modes;
    for (const SectorModes& sector : sectors)
    {
        const Parity parity = sector_parity(sector.sector);
        for (const ExtractedMode& extracted : sector.modes)
        {
            ResonantMode mode;
            mode.wavelength = extracted.wavelength;
            mode.q = extracted.q;
            mode.amplitude = extracted.amplitude;
            mode.parity = parity;
            mode.polarization_axis = parity_polarization(parity, 1);
            modes.push_back(std::move(mode));
        }
    }
    return label_modes(std::move(modes));
}

SolveOutput solve_design(const DesignSpec& design, const SimSettings& sim,
                         const AnalysisSettings& analysis)
{
    SolveOutput output;
    output.grid = rasterize_design(design, sim);

    std::vector<SectorModes> sector_modes;
    for (Mirror sector : sim.sectors)
    {
        const SimConfig config = make_sim_config(design, sim, sector);
        RunOptions options;
        options.ringdown_periods = sim.ringdown_periods;
        const RunResult result = run_to_spectrum(output.grid, config, options);
        sector_modes.push_back(merge_probe_modes(sector, as_loaded(result.probes), analysis));
    }

    struct FieldRecord
    {
        Mirror sector;
        ModeField field;
        double volume;
        Parity parity;
        int dominant_axis;
    };
    std::vector<FieldRecord> records;

    if (analysis.mode_fields)
    {
        for (const SectorModes& sector : sector_modes)
        {
            if (sector.modes.empty())
            {
                continue;
            }
            std::vector<double> wavelengths;
            std::vector<double> qs;
            for (const ExtractedMode& mode : sector.modes)
            {
                wavelengths.push_back(mode.wavelength);
                qs.push_back(mode.q);
            }
            const SimConfig config = make_sim_config(design, sim, sector.sector);
            RunOptions options;
            options.ringdown_periods = sim.dft_periods;
            options.dft_wavelengths = wavelengths;
            RunResult result = run_to_spectrum(output.grid, config, options);
            demix_mode_fields(result.fields, qs);
            for (ModeField& field : result.fields)
            {
                FieldRecord record;
                record.sector = sector.sector;
                record.volume = mode_volume(field, output.grid, design.refractive_index());
                const ParityResult parity = classify_parity(field);
                record.parity = parity.parity;
                record.dominant_axis = parity.dominant_axis;
                record.field = std::move(field);
                records.push_back(std::move(record));
            }
        }
    }

    // assemble the labelled table, folding measured parities and volumes in
    std::vector<ResonantMode> modes;
    for (const SectorModes& sector : sector_modes)
    {
        const Parity forced = sector_parity(sector.sector);
        for (const ExtractedMode& extracted : sector.modes)
        {
            ResonantMode mode;
            mode.wavelength = extracted.wavelength;
            mode.q = extracted.q;
            mode.amplitude = extracted.amplitude;
            mode.parity = forced;
            mode.polarization_axis = parity_polarization(forced, 1);
            for (const FieldRecord& record : records)
            {
                if (record.sector == sector.sector &&
                    std::abs(record.field.wavelength - extracted.wavelength) < 1e-9)
                {
                    mode.volume = record.volume;
                    if (mode.parity == Parity::indeterminate)
                    {
                        mode.parity = record.parity;
                        mode.polarization_axis =
                            parity_polarization(record.parity, record.dominant_axis);
                    }
                    break;
                }
            }
            modes.push_back(std::move(mode));
        }
    }
    output.modes = label_modes(std::move(modes));

    for (FieldRecord& record : records)
    {
        // pin each stored field to the final label of its mode
        const ResonantMode* best = nullptr;
        double best_dist = std::numeric_limits<double>::infinity();
        for (const ResonantMode& mode : output.modes)
        {
            const double dist = std::abs(mode.wavelength - record.field.wavelength);
            if (dist < best_dist)
            {
                best_dist = dist;
                best = &mode;
            }
        }
        output.field_labels.push_back(best != nullptr ? best->label : "-");
        output.fields.push_back(std::move(record.field));
    }
    return output;
}

SpectrumSolver make_fdtd_solver(const SimSettings& sim, const AnalysisSettings& analysis)
{
    AnalysisSettings no_fields = analysis;
    no_fields.mode_fields = false;
    return [sim, no_fields](const CavityDesign& cavity)
    {
        DesignSpec spec;
        spec.cavity = cavity;
        return solve_design(spec, sim, no_fields).modes;
    };
}

RunConfig load_run_config(const ConfigDoc& doc, const std::string& base_dir)
{
    RunConfig config;

    ConfigReader output(doc, "output");
    config.out_dir = resolve_path(base_dir, output.text("directory", "out"));
    const std::uint64_t global_seed = output.seed("seed", 7);
    output.reject_unknown_keys();

    ConfigReader design(doc, "design");
    const std::string kind = design.text("kind", "m7");
    config.design.cavity.material.refractive_index = design.number("refractive_index", 2.4);
    bool m7ish = true;
    double tilt = 0.0;
    if (kind == "m7")
    {
        M7Params params;
        params.lattice_constant = design.number("lattice_constant", params.lattice_constant);
        params.hole_radius = design.number("hole_radius", params.hole_radius);
        params.thickness = design.number("thickness", params.thickness);
        params.rings = static_cast<int>(design.integer("rings", params.rings));
        params.tilt_deg = design.number("tilt", 0.0);
        tilt = params.tilt_deg;
        config.design.cavity.params = params;
    }
    else if (kind == "nanobeam")
    {
        m7ish = false;
        NanobeamParams params;
        params.pitch = design.number("pitch", params.pitch);
        params.width = design.number("width", params.width);
        params.height = design.number("height", params.height);
        params.radius_center = design.number("radius_center", params.radius_center);
        params.radius_edge = design.number("radius_edge", params.radius_edge);
        params.segments_per_side =
            static_cast<int>(design.integer("segments_per_side", params.segments_per_side));
        params.tilt_deg = design.number("tilt", 0.0);
        tilt = params.tilt_deg;
        config.design.cavity.params = params;
    }
    else if (kind == "mask")
    {
        config.design.mask_path = resolve_path(base_dir, design.require_text("image"));
        if (!fs::exists(config.design.mask_path))
        {
            throw std::invalid_argument("config [design].image: file not found: " +
                                        config.design.mask_path);
        }
        config.design.mask_options.pixel_pitch = design.number("pixel_pitch", 2.0);
        config.design.mask_options.threshold = design.number("threshold", 0.5);
        config.design.mask_options.thickness = design.number("thickness", 300.0);
        config.design.mask_pitch = design.number("pitch", 275.0);
    }
    else
    {
        throw std::invalid_argument("config [design].kind must be m7, nanobeam or mask, not '" +
                                    kind + "'");
    }
    config.design.position_jitter = design.number("position_jitter", 0.0);
    config.design.radius_jitter = design.number("radius_jitter", 0.0);
    config.design.jitter_seed = design.seed("jitter_seed", global_seed);
    design.reject_unknown_keys();
    if (config.design.uses_mask())
    {
        require(config.design.position_jitter == 0.0 && config.design.radius_jitter == 0.0,
                "config [design]: jitter cannot be applied to a mask import");
        config.design.cavity.material.validate();
    }
    else
    {
        config.design.cavity.validate();
    }
    const bool jittered =
        config.design.position_jitter > 0.0 || config.design.radius_jitter > 0.0;

    ConfigReader sim(doc, "simulation");
    config.sim.dx = sim.number("dx", 0.0);
    config.sim.courant = sim.number("courant", 0.5);
    config.sim.pml.layers = static_cast<int>(sim.integer("pml_layers", 12));
    config.sim.margin_x = sim.number("margin_x", 0.0);
    config.sim.margin_y = sim.number("margin_y", m7ish ? 0.0 : 550.0);
    config.sim.margin_z = sim.number("margin_z", 625.0);
    config.sim.symmetry_x =
        parse_mirror(sim.text("symmetry_x", "none"), "config [simulation].symmetry_x");
    config.sim.symmetry_z = parse_mirror(sim.text("symmetry_z", tilt > 0.0 ? "none" : "odd"),
                                         "config [simulation].symmetry_z");
    const char* default_sectors = jittered ? "none" : (m7ish ? "even,odd" : "even");
    config.sim.sectors = parse_sectors(sim.text("sectors", default_sectors));
    config.sim.wavelength = sim.number("wavelength", m7ish ? 780.0 : 625.0);
    config.sim.bandwidth = sim.number("bandwidth", 0.2);
    config.sim.ringdown_periods = sim.number("ringdown_periods", 400.0);
    config.sim.dft_periods = sim.number("dft_periods", 200.0);
    config.sim.max_memory_gb = sim.number("max_memory_gb", 6.0);
    sim.reject_unknown_keys();
    require(config.sim.dx >= 0.0, "config [simulation].dx must be non-negative");
    require(config.sim.wavelength > 0.0, "config [simulation].wavelength must be positive");
    require(config.sim.bandwidth > 0.0, "config [simulation].bandwidth must be positive");
    require(config.sim.ringdown_periods > 0.0,
            "config [simulation].ringdown_periods must be positive");

    ConfigReader analysis(doc, "analysis");
    config.analysis.band_min = analysis.number("band_min", m7ish ? 700.0 : 600.0);
    config.analysis.band_max = analysis.number("band_max", m7ish ? 840.0 : 650.0);
    config.analysis.max_modes = static_cast<int>(analysis.integer("max_modes", 8));
    config.analysis.amplitude_floor = analysis.number("amplitude_floor", 0.02);
    config.analysis.spectrum_points = static_cast<int>(analysis.integer("spectrum_points", 600));
    config.analysis.mode_fields = analysis.flag("mode_fields", true);
    analysis.reject_unknown_keys();
    require(config.analysis.band_min > 0.0 && config.analysis.band_max > config.analysis.band_min,
            "config [analysis]: band_max must exceed band_min and both must be positive");
    require(config.analysis.max_modes >= 1, "config [analysis].max_modes must be at least 1");
    require(config.analysis.spectrum_points >= 2,
            "config [analysis].spectrum_points must be at least 2");

    ConfigReader purcell(doc, "purcell");
    config.purcell.q_override = purcell.number("q", 0.0);
    config.purcell.v_mod_override = purcell.number("v_mod", 0.0);
    config.purcell.ensemble.branching.zpl = purcell.number("zpl", 0.04);
    config.purcell.ensemble.branching.psb = purcell.number("psb", 0.01);
    config.purcell.ensemble.branching.nonradiative = purcell.number("nonradiative", 0.95);
    config.purcell.ensemble.emitter_fwhm = purcell.number("emitter_fwhm", 2.0);
    config.purcell.ensemble.detuning = purcell.number("detuning", 0.0);
    config.purcell.ensemble.inhomogeneous_sigma = purcell.number("inhomogeneous_sigma", 0.0);
    config.purcell.ensemble.suppression = purcell.number("suppression", 1.0);
    config.purcell.ensemble.collection = purcell.number("collection", 1.0);
    config.purcell.ensemble.spot_waist = purcell.number("spot_waist", 405.7);
    config.purcell.ensemble.in_plane_dipoles = purcell.flag("in_plane_dipoles", true);
    config.purcell.ensemble.samples = static_cast<int>(purcell.integer("samples", 2000));
    config.purcell.ensemble.seed = purcell.seed("seed", global_seed);
    config.purcell.field = purcell.text("field", "");
    config.purcell.mode = purcell.text("mode", "");
    purcell.reject_unknown_keys();
    config.purcell.ensemble.branching.validate();

    ConfigReader tuning(doc, "tuning");
    config.tuning.step.surface_recession = tuning.number("recession", 1.5);
    config.tuning.steps = static_cast<int>(tuning.integer("steps", 5));
    const std::string parameter = tuning.text("parameter", "all_radii");
    if (parameter == "all_radii")
    {
        config.tuning.parameter = TuneParameter::all_radii;
    }
    else if (parameter == "thickness")
    {
        config.tuning.parameter = TuneParameter::thickness;
    }
    else
    {
        throw std::invalid_argument(
            "config [tuning].parameter must be all_radii or thickness, not '" + parameter + "'");
    }
    config.tuning.delta = tuning.number("delta", 1.5);
    config.tuning.mode = tuning.text("mode", "");
    config.tuning.target = tuning.number("target", 0.0);
    tuning.reject_unknown_keys();
    require(config.tuning.steps >= 1, "config [tuning].steps must be at least 1");

    for (const ConfigSection& section : doc.sections)
    {
        static const char* known[] = { "design", "simulation", "analysis",
                                       "purcell", "tuning", "output" };
        if (std::find_if(std::begin(known), std::end(known), [&](const char* name)
                         { return section.name == name; }) == std::end(known))
        {
            throw std::invalid_argument("config [" + section.name +
                                        "] is not a recognised section (line " +
                                        std::to_string(section.line) + ")");
        }
    }
    return config;
}

} // namespace phc
