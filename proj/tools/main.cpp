#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "phc/analysis.hpp"
#include "phc/config.hpp"
#include "phc/io.hpp"
#include "phc/pipeline.hpp"
#include "phc/purcell.hpp"
#include "phc/tuning.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace
{

struct CommonArgs
{
    std::string config_path;
    std::string out_override;
    std::vector<std::string> overrides;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args)
{
    cmd->add_option("-c,--config", args.config_path, "run configuration file")
        ->required();
    cmd->add_option("--out", args.out_override, "override the output directory");
    cmd->add_option("--set", args.overrides, "override a config value as section.key=value");
    cmd->add_option("--threads", args.threads, "cap worker threads (0 = library default)");
}

phc::RunConfig load(const CommonArgs& args)
{
#ifdef _OPENMP
    if (args.threads > 0)
    {
        omp_set_num_threads(args.threads);
    }
#endif
    phc::ConfigDoc doc = phc::load_config_file(args.config_path);
    for (const std::string& assignment : args.overrides)
    {
        phc::apply_override(doc, assignment);
    }
    const std::string base_dir = fs::path(args.config_path).parent_path().string();
    phc::RunConfig config = phc::load_run_config(doc, base_dir);
    if (!args.out_override.empty())
    {
        config.out_dir = args.out_override;
    }
    fs::create_directories(config.out_dir);
    return config;
}

std::string artifact(const phc::RunConfig& config, const std::string& name)
{
    return (fs::path(config.out_dir) / name).string();
}

std::string probe_file(const phc::RunConfig& config, phc::Mirror sector, std::size_t index)
{
    return artifact(config, "probe_" + phc::sector_tag(sector) + "_" + std::to_string(index) +
                                ".csv");
}

std::string field_base(const phc::RunConfig& config, phc::Mirror sector, std::size_t index)
{
    return artifact(config, "modefield_" + phc::sector_tag(sector) + "_" +
                                std::to_string(index));
}

int cmd_design(const phc::RunConfig& config)
{
    const phc::DielectricStructure structure = config.design.build();
    phc::write_text_file(artifact(config, "structure.txt"),
                         phc::serialize_structure(structure));

    const phc::EpsilonGrid grid = phc::rasterize_design(config.design, config.sim);
    phc::write_eps_slice_csv(artifact(config, "eps_slice.csv"), grid);
    phc::write_manifest(config.out_dir);

    std::cout << "design: " << structure.holes.size() << " holes, grid " << grid.nx << "x"
              << grid.ny << "x" << grid.nz << " at dx " << grid.dx << " nm\n";
    return 0;
}

int cmd_run(const phc::RunConfig& config, bool resume)
{
    if (resume)
    {
        bool finished = true;
        for (phc::Mirror sector : config.sim.sectors)
        {
            finished = finished && fs::exists(probe_file(config, sector, 0));
        }
        if (finished)
        {
            std::cout << "run: artifacts already present, nothing to do\n";
            return 0;
        }
    }

    const phc::EpsilonGrid grid = phc::rasterize_design(config.design, config.sim);
    std::cout << "run: grid " << grid.nx << "x" << grid.ny << "x" << grid.nz << " at dx "
              << grid.dx << " nm\n";

    for (phc::Mirror sector : config.sim.sectors)
    {
        const phc::SimConfig sim_config =
            phc::make_sim_config(config.design, config.sim, sector);

        phc::RunOptions options;
        options.ringdown_periods = config.sim.ringdown_periods;
        phc::FieldSnapshot snapshot;
        bool taken = false;
        options.on_step = [&](phc::SimState& state)
        {
            if (!taken && !state.sources_active())
            {
                snapshot = state.snapshot(1);
                taken = true;
            }
        };

        const phc::RunResult result = phc::run_to_spectrum(grid, sim_config, options);
        for (std::size_t k = 0; k < result.probes.samples.size(); ++k)
        {
            phc::write_probe_csv(probe_file(config, sector, k), result.probes, k);
        }
        if (taken)
        {
            phc::write_snapshot(
                artifact(config, "snapshot_" + phc::sector_tag(sector) + "_ey"), snapshot);
        }
        std::cout << "run: sector " << phc::sector_tag(sector) << " finished after "
                  << result.steps << " steps\n";

        if (config.analysis.mode_fields)
        {
            std::vector<phc::LoadedProbe> loaded;
            for (std::size_t k = 0; k < result.probes.samples.size(); ++k)
            {
                phc::LoadedProbe probe;
                probe.dt = result.probes.dt;
                probe.ringdown_start = result.probes.ringdown_start;
                probe.probe = result.probes.probes[k];
                probe.samples = result.probes.samples[k];
                loaded.push_back(std::move(probe));
            }
            const phc::SectorModes merged =
                phc::merge_probe_modes(sector, loaded, config.analysis);
            if (!merged.modes.empty())
            {
                phc::RunOptions field_options;
                field_options.ringdown_periods = config.sim.dft_periods;
                for (const phc::ExtractedMode& mode : merged.modes)
                {
                    field_options.dft_wavelengths.push_back(mode.wavelength);
                }
                const phc::RunResult pass2 =
                    phc::run_to_spectrum(grid, sim_config, field_options);
                for (std::size_t m = 0; m < pass2.fields.size(); ++m)
                {
                    phc::save_mode_field(field_base(config, sector, m), pass2.fields[m]);
                }
                std::cout << "run: sector " << phc::sector_tag(sector) << " stored "
                          << pass2.fields.size() << " mode fields\n";
            }
        }
    }
    phc::write_manifest(config.out_dir);
    return 0;
}

int cmd_analyze(const phc::RunConfig& config)
{
    std::vector<phc::SectorModes> sector_modes;
    std::vector<phc::LoadedProbe> all_probes;

    struct FieldEntry
    {
        phc::Mirror sector;
        phc::ModeField field;
    };
    std::vector<FieldEntry> fields;

    for (phc::Mirror sector : config.sim.sectors)
    {
        std::vector<phc::LoadedProbe> loaded;
        for (std::size_t k = 0;; ++k)
        {
            const std::string path = probe_file(config, sector, k);
            if (!fs::exists(path))
            {
                break;
            }
            loaded.push_back(phc::read_probe_csv(path));
        }
        if (loaded.empty())
        {
            throw std::runtime_error("no probe artifacts for sector '" +
                                     phc::sector_tag(sector) + "' in " + config.out_dir +
                                     "; run the 'run' command first");
        }
        sector_modes.push_back(phc::merge_probe_modes(sector, loaded, config.analysis));
        for (phc::LoadedProbe& probe : loaded)
        {
            all_probes.push_back(std::move(probe));
        }
        if (config.analysis.mode_fields)
        {
            for (std::size_t m = 0;; ++m)
            {
                const std::string base = field_base(config, sector, m);
                if (!fs::exists(base + ".json"))
                {
                    break;
                }
                fields.push_back(FieldEntry { sector, phc::load_mode_field(base) });
            }
        }
    }

    // volumes and full-domain parities need the permittivity the fields live on
    phc::EpsilonGrid grid;
    if (!fields.empty())
    {
        grid = phc::rasterize_design(config.design, config.sim);
    }

    std::vector<phc::ResonantMode> modes;
    for (const phc::SectorModes& sector : sector_modes)
    {
        for (const phc::ExtractedMode& extracted : sector.modes)
        {
            phc::ResonantMode mode;
            mode.wavelength = extracted.wavelength;
            mode.q = extracted.q;
            mode.amplitude = extracted.amplitude;
            switch (sector.sector)
            {
                case phc::Mirror::even: mode.parity = phc::Parity::even; break;
                case phc::Mirror::odd: mode.parity = phc::Parity::odd; break;
                default: mode.parity = phc::Parity::indeterminate; break;
            }
            mode.polarization_axis = mode.parity == phc::Parity::odd ? 0 : 1;

            const double fwhm = mode.q > 0.0 ? mode.wavelength / mode.q : 0.0;
            for (const FieldEntry& entry : fields)
            {
                if (entry.sector != sector.sector ||
                    std::abs(entry.field.wavelength - mode.wavelength) >
                        std::max(0.5 * fwhm, 1e-6))
                {
                    continue;
                }
                mode.volume = phc::mode_volume(entry.field, grid,
                                               config.design.refractive_index());
                const phc::ParityResult parity = phc::classify_parity(entry.field);
                if (mode.parity == phc::Parity::indeterminate)
                {
                    mode.parity = parity.parity;
                    if (mode.parity == phc::Parity::even)
                    {
                        mode.polarization_axis = 1;
                    }
                    else if (mode.parity == phc::Parity::odd)
                    {
                        mode.polarization_axis = 0;
                    }
                    else
                    {
                        mode.polarization_axis = parity.dominant_axis;
                    }
                }
                break;
            }
            modes.push_back(std::move(mode));
        }
    }
    modes = phc::label_modes(std::move(modes));
    phc::write_modes_json(artifact(config, "modes.json"), modes);

    phc::Spectrum merged;
    for (const phc::LoadedProbe& probe : all_probes)
    {
        const phc::Spectrum one = phc::compute_spectrum(
            probe.ringdown(), probe.dt, config.analysis.band_min, config.analysis.band_max,
            config.analysis.spectrum_points);
        if (merged.wavelength.empty())
        {
            merged = one;
        }
        else
        {
            for (std::size_t i = 0; i < merged.power.size(); ++i)
            {
                merged.power[i] += one.power[i];
            }
        }
    }
    phc::write_spectrum_csv(artifact(config, "spectrum.csv"), merged);
    phc::write_manifest(config.out_dir);

    std::cout << "analyze: " << modes.size() << " modes in " << config.analysis.band_min << "-"
              << config.analysis.band_max << " nm\n";
    for (const phc::ResonantMode& mode : modes)
    {
        std::cout << "  " << mode.label << "  lambda " << mode.wavelength << " nm  q " << mode.q;
        if (mode.volume.has_value())
        {
            std::cout << "  v_mod " << *mode.volume;
        }
        std::cout << "\n";
    }
    return 0;
}

void require_parametric(const phc::RunConfig& config, const std::string& command)
{
    if (config.design.uses_mask())
    {
        throw std::invalid_argument(command + " needs a parametric design, not a mask import");
    }
    if (config.design.position_jitter > 0.0 || config.design.radius_jitter > 0.0)
    {
        throw std::invalid_argument(command + " needs an unjittered design");
    }
}

int cmd_sweep(const phc::RunConfig& config)
{
    require_parametric(config, "sweep");
    const phc::SpectrumSolver solver = phc::make_fdtd_solver(config.sim, config.analysis);
    const phc::SensitivityReport report = phc::sensitivity(
        config.design.cavity, config.tuning.parameter, config.tuning.delta, solver);
    phc::write_sensitivity_csv(artifact(config, "sensitivity.csv"), report);
    phc::write_manifest(config.out_dir);
    std::cout << "sweep: mean slope " << report.mean_slope() << " nm/nm over "
              << report.shifts.size() << " modes\n";
    return 0;
}

int cmd_etch(const phc::RunConfig& config)
{
    require_parametric(config, "etch");
    const phc::SpectrumSolver solver = phc::make_fdtd_solver(config.sim, config.analysis);
    const phc::TuningTrace trace = phc::etch_sequence(config.design.cavity, config.tuning.step,
                                                      config.tuning.steps, solver);
    phc::write_trace_csv(artifact(config, "etch_trace.csv"), trace);

    if (config.tuning.target > 0.0 && !config.tuning.mode.empty())
    {
        const phc::TuningPlan plan =
            phc::plan_to_target(config.design.cavity, config.tuning.mode, config.tuning.target,
                                config.tuning.step, solver);
        ordered_json report;
        report["mode"] = config.tuning.mode;
        report["target_nm"] = config.tuning.target;
        report["steps_required"] = plan.steps_required;
        report["start_nm"] = plan.start_wavelength;
        report["predicted_nm"] = plan.predicted_wavelength;
        report["tolerance_nm"] = plan.tolerance;
        phc::write_text_file(artifact(config, "etch_plan.json"), report.dump(2) + "\n");
        std::cout << "etch: " << plan.steps_required << " steps reach " << config.tuning.target
                  << " nm\n";
    }
    phc::write_manifest(config.out_dir);
    std::cout << "etch: traced " << trace.labels().size() << " modes over "
              << config.tuning.steps << " steps\n";
    return 0;
}

int cmd_purcell(const phc::RunConfig& config)
{
    phc::EnsembleParams params = config.purcell.ensemble;
    double q = config.purcell.q_override;
    double v_mod = config.purcell.v_mod_override;

    if (!config.purcell.mode.empty())
    {
        const std::vector<phc::ResonantMode> modes =
            phc::read_modes_json(artifact(config, "modes.json"));
        const auto it =
            std::find_if(modes.begin(), modes.end(), [&](const phc::ResonantMode& mode)
                         { return mode.label == config.purcell.mode; });
        if (it == modes.end())
        {
            throw std::runtime_error("no mode labelled '" + config.purcell.mode +
                                     "' in modes.json");
        }
        if (q <= 0.0)
        {
            q = it->q;
        }
        if (v_mod <= 0.0 && it->volume.has_value())
        {
            v_mod = *it->volume;
        }
    }
    if (q <= 0.0 || v_mod <= 0.0)
    {
        throw std::invalid_argument(
            "config [purcell]: q and v_mod must be positive (set them directly or name an "
            "analyzed mode that provides them)");
    }
    params.q = q;
    params.v_mod = v_mod;

    const double f_c = phc::ideal_purcell(q, v_mod);
    const phc::EmitterRates rates = phc::single_emitter_rates(f_c, params.branching);

    ordered_json report;
    report["q"] = q;
    report["v_mod"] = v_mod;
    report["f_c_ideal"] = f_c;
    report["single_emitter"] = { { "total_rate_multiplier", rates.total_rate },
                                 { "zpl_fraction", rates.zpl_fraction },
                                 { "radiative_yield_ratio", rates.efficiency_gain } };

    if (!config.purcell.field.empty())
    {
        const phc::ModeField field =
            phc::load_mode_field(artifact(config, config.purcell.field));
        const phc::EpsilonGrid grid = phc::rasterize_design(config.design, config.sim);
        const phc::EnsembleResult ensemble = phc::ensemble_enhancement(field, grid, params);
        report["ensemble"] = { { "zpl_intensity_enhancement", ensemble.enhancement },
                               { "total_rate_change", ensemble.total_rate_ratio - 1.0 },
                               { "sampling_se", ensemble.standard_error },
                               { "mean_weight", ensemble.mean_weight },
                               { "samples", ensemble.samples },
                               { "rejected", ensemble.rejected } };
        std::cout << "purcell: f_c " << f_c << ", ensemble enhancement "
                  << ensemble.enhancement << " +- " << ensemble.standard_error << "\n";
    }
    else
    {
        std::cout << "purcell: f_c " << f_c << " (no mode field configured, ensemble skipped)\n";
    }

    phc::write_text_file(artifact(config, "purcell.json"), report.dump(2) + "\n");
    phc::write_manifest(config.out_dir);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app { "diamond photonic-crystal cavity design and analysis" };
    app.require_subcommand(1);

    CommonArgs args;
    bool resume = false;

    CLI::App* design = app.add_subcommand("design", "serialize the structure and an eps slice");
    add_common(design, args);
    CLI::App* run = app.add_subcommand("run", "simulate the configured sectors");
    add_common(run, args);
    run->add_flag("--resume", resume, "skip the run when its artifacts already exist");
    CLI::App* analyze = app.add_subcommand("analyze", "extract the mode table from artifacts");
    add_common(analyze, args);
    CLI::App* sweep = app.add_subcommand("sweep", "finite-difference wavelength sensitivity");
    add_common(sweep, args);
    CLI::App* etch = app.add_subcommand("etch", "digital-etch tuning sequence");
    add_common(etch, args);
    CLI::App* purcell = app.add_subcommand("purcell", "emission-enhancement report");
    add_common(purcell, args);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp& e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError& e)
    {
        app.exit(e);
        return 1;
    }

    try
    {
        const phc::RunConfig config = load(args);
        if (design->parsed())
        {
            return cmd_design(config);
        }
        if (run->parsed())
        {
            return cmd_run(config, resume);
        }
        if (analyze->parsed())
        {
            return cmd_analyze(config);
        }
        if (sweep->parsed())
        {
            return cmd_sweep(config);
        }
        if (etch->parsed())
        {
            return cmd_etch(config);
        }
        if (purcell->parsed())
        {
            return cmd_purcell(config);
        }
        throw std::invalid_argument("no subcommand selected");
    }
    catch (const std::invalid_argument& e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
