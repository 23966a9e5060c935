#include "phc/tuning.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "testing.hpp"

using namespace phc;
using testing::check;
using testing::check_near;
using testing::check_throws;

namespace
{

M7Params m7_of(const CavityDesign& design)
{
    return std::get<M7Params>(design.params);
}

// linear three-mode spectrum over the m7 parameters; each etch step of 1.5 nm
// recession blue-shifts the fundamental by exactly 3 nm
std::vector<ResonantMode> linear_solver(const CavityDesign& design)
{
    const M7Params p = m7_of(design);
    const double dr = p.hole_radius - 85.25;
    const double dt = p.thickness - 302.5;

    std::vector<ResonantMode> modes(3);
    modes[0].wavelength = 741.0 - 1.0 * dr + 0.5 * dt;
    modes[0].q = 400.0;
    modes[0].parity = Parity::even;
    modes[1].wavelength = 721.0 - 0.8 * dr + 0.4 * dt;
    modes[1].q = 300.0;
    modes[1].parity = Parity::odd;
    modes[2].wavelength = 696.0 - 1.2 * dr + 0.6 * dt;
    modes[2].q = 200.0;
    modes[2].parity = Parity::even;
    for (ResonantMode& mode : modes)
    {
        mode.amplitude = 1.0;
    }
    return label_modes(std::move(modes));
}

void test_etch_once()
{
    CavityDesign design;
    M7Params m7;
    m7.hole_radius = 85.0;
    m7.thickness = 300.0;
    design.params = m7;

    const CavityDesign etched = etch_once(design, EtchStep { 1.5 });
    check_near("one etch step grows the radius", m7_of(etched).hole_radius, 86.5, 1e-12);
    check_near("one etch step thins the slab", m7_of(etched).thickness, 297.0, 1e-12);
    check_near("untouched parameters survive", m7_of(etched).lattice_constant, 275.0, 1e-12);

    CavityDesign repeated = design;
    for (int i = 0; i < 10; ++i)
    {
        repeated = etch_once(repeated, EtchStep { 1.5 });
    }
    check_near("ten steps accumulate linearly in radius", m7_of(repeated).hole_radius, 100.0,
               1e-12);
    check_near("ten steps accumulate linearly in thickness", m7_of(repeated).thickness, 270.0,
               1e-12);

    CavityDesign beam_design;
    NanobeamParams beam;
    beam_design.params = beam;
    const CavityDesign etched_beam = etch_once(beam_design, EtchStep { 2.0 });
    const NanobeamParams after = std::get<NanobeamParams>(etched_beam.params);
    check("a beam etch opens every hole and shrinks both cross-section sides",
          after.radius_center == 86.0 && after.radius_edge == 76.0 && after.height == 296.0
              && after.width == 296.0);

    CavityDesign fragile = design;
    M7Params wide = m7;
    wide.hole_radius = 136.5;
    fragile.params = wide;
    check_throws("an etch that breaks the design is rejected",
                 [&] { etch_once(fragile, EtchStep { 1.5 }); }, "invalidates the design");

    check_throws("zero recession is rejected", [&] { etch_once(design, EtchStep { 0.0 }); },
                 "must be positive");
}

void test_sensitivity()
{
    CavityDesign design;

    int calls = 0;
    const SpectrumSolver counting = [&](const CavityDesign& d)
    {
        ++calls;
        return linear_solver(d);
    };

    const SensitivityReport radii = sensitivity(design, TuneParameter::all_radii, 1.5, counting);
    check("sensitivity reports every base mode", radii.shifts.size() == 3);
    check_near("fundamental slope under radius growth", radii.shifts[0].slope, -1.0, 1e-9);
    check_near("mean slope averages the families", radii.mean_slope(), -1.0, 1e-9);
    check("slopes carry the mode labels",
          radii.shifts[0].label == "e1" && radii.shifts[1].label == "o1"
              && radii.shifts[2].label == "e2");

    const SensitivityReport thick =
        sensitivity(design, TuneParameter::thickness, 2.0, linear_solver);
    check_near("fundamental slope under thickening", thick.shifts[0].slope, 0.5, 1e-9);
    check_near("higher modes follow their own slopes", thick.shifts[2].slope, 0.6, 1e-9);

    calls = 0;
    const SensitivityReport frozen = sensitivity(design, TuneParameter::all_radii, 0.0, counting);
    check("zero delta solves the base spectrum only once", calls == 1);
    check("zero delta reports explicit zero slopes",
          frozen.shifts.size() == 3 && frozen.shifts[0].slope == 0.0
              && !frozen.shifts[0].ambiguous
              && frozen.shifts[0].lambda_perturbed == frozen.shifts[0].lambda_base);
}

void test_match_ambiguity()
{
    CavityDesign design;

    int generation = 0;
    const SpectrumSolver crowding = [&](const CavityDesign&)
    {
        std::vector<ResonantMode> modes(2);
        modes[0].wavelength = generation == 0 ? 740.0 : 739.2;
        modes[1].wavelength = generation == 0 ? 738.9 : 739.0;
        for (ResonantMode& mode : modes)
        {
            mode.q = 400.0;
            mode.parity = Parity::even;
            mode.amplitude = 1.0;
        }
        ++generation;
        return label_modes(std::move(modes));
    };

    const SensitivityReport report =
        sensitivity(design, TuneParameter::all_radii, 1.0, crowding);
    check("a runner-up inside half a linewidth flags ambiguity",
          report.shifts[0].ambiguous && report.shifts[1].ambiguous);
    check("ambiguous modes drop out of the mean", report.mean_slope() == 0.0);

    generation = 0;
    const SpectrumSolver vanishing = [&](const CavityDesign&)
    {
        std::vector<ResonantMode> modes;
        if (generation++ == 0)
        {
            modes.resize(1);
            modes[0].wavelength = 740.0;
            modes[0].q = 400.0;
            modes[0].parity = Parity::even;
        }
        return label_modes(std::move(modes));
    };
    const SensitivityReport lost = sensitivity(design, TuneParameter::all_radii, 1.0, vanishing);
    check("a vanished mode is ambiguous rather than matched",
          lost.shifts.size() == 1 && lost.shifts[0].ambiguous);
}

void test_etch_sequence()
{
    CavityDesign design;
    const TuningTrace trace = etch_sequence(design, EtchStep { 1.5 }, 5, linear_solver);

    check("the trace keeps the base and every etched design", trace.designs.size() == 6);
    check("all three modes stay tracked",
          trace.labels() == std::vector<std::string> { "e1", "o1", "e2" });

    const std::vector<TracePoint> fundamental = trace.track("e1");
    check("five steps leave six rows per mode", fundamental.size() == 6);
    bool linear = true;
    bool monotone = true;
    for (std::size_t n = 0; n < fundamental.size(); ++n)
    {
        linear = linear
                 && std::abs(fundamental[n].wavelength - (741.0 - 3.0 * n)) < 1e-9
                 && fundamental[n].step == static_cast<int>(n);
        if (n > 0)
        {
            monotone = monotone && fundamental[n].wavelength < fundamental[n - 1].wavelength;
        }
    }
    check("the fundamental shifts three nanometres blue per step", linear);
    check("every recorded shift is monotone blue", monotone);

    check_near("total accumulated shift after five steps",
               fundamental.front().wavelength - fundamental.back().wavelength, 15.0, 1e-9);

    // a solver that stops reporting the odd family mid-sequence
    const SpectrumSolver flaky = [](const CavityDesign& d)
    {
        std::vector<ResonantMode> modes = linear_solver(d);
        if (m7_of(d).hole_radius > 89.0)
        {
            modes.erase(modes.begin() + 1);
        }
        return label_modes(std::move(modes));
    };
    const TuningTrace partial = etch_sequence(design, EtchStep { 1.5 }, 5, flaky);
    check("a lost mode stops being tracked without derailing the rest",
          partial.track("o1").size() == 3 && partial.track("e1").size() == 6);
}

void test_plan_to_target()
{
    CavityDesign design;

    const TuningPlan one = plan_to_target(design, "e1", 738.0, EtchStep { 1.5 }, linear_solver);
    check("a three-nanometre target needs exactly one step", one.steps_required == 1);
    check_near("the plan lands on the target", one.predicted_wavelength, 738.0, 1e-9);
    check("the one-step plan needs two solves", one.solver_calls == 2);

    const TuningPlan none = plan_to_target(design, "e1", 741.0, EtchStep { 1.5 }, linear_solver);
    check("a target already in reach needs no steps",
          none.steps_required == 0 && none.solver_calls == 1
              && none.predicted_wavelength == 741.0);

    const TuningPlan nine = plan_to_target(design, "e1", 714.0, EtchStep { 1.5 }, linear_solver);
    check("a distant target extrapolates in one jump",
          nine.steps_required == 9 && nine.solver_calls == 3,
          "steps " + std::to_string(nine.steps_required) + ", solves "
              + std::to_string(nine.solver_calls));
    check_near("the nine-step plan lands on the target", nine.predicted_wavelength, 714.0,
               1e-9);

    check_throws("red targets are impossible",
                 [&] { plan_to_target(design, "e1", 745.0, EtchStep { 1.5 }, linear_solver); },
                 "cannot red-tune");

    check_throws("unknown labels are reported",
                 [&] { plan_to_target(design, "z9", 738.0, EtchStep { 1.5 }, linear_solver); },
                 "no mode labelled");

    check_throws("unreachable targets respect the step budget",
                 [&]
                 { plan_to_target(design, "e1", 600.0, EtchStep { 1.5 }, linear_solver, 10); },
                 "not reachable within 10");

    const SpectrumSolver red_shifting = [](const CavityDesign& d)
    {
        const M7Params p = m7_of(d);
        std::vector<ResonantMode> modes(1);
        modes[0].wavelength = 741.0 + 1.0 * (p.hole_radius - 85.25);
        modes[0].q = 400.0;
        modes[0].parity = Parity::even;
        return label_modes(std::move(modes));
    };
    check_throws("a red-shifting response is detected",
                 [&] { plan_to_target(design, "e1", 730.0, EtchStep { 1.5 }, red_shifting); },
                 "does not blue-shift");
}

void test_design_variants()
{
    CavityDesign m7_design;
    check("the default design is the m7 family", m7_design.is_m7());
    check("the m7 design builds its structure", !m7_design.build().holes.empty());

    CavityDesign beam_design;
    beam_design.params = NanobeamParams {};
    check("the beam design builds its structure",
          !beam_design.is_m7() && beam_design.build().holes.size() == 20);

    CavityDesign broken;
    M7Params bad;
    bad.rings = 2;
    broken.params = bad;
    check_throws("design validation drills into the active family",
                 [&] { broken.validate(); }, "at least 4");
}

} // namespace

int main()
{
    test_etch_once();
    test_sensitivity();
    test_match_ambiguity();
    test_etch_sequence();
    test_plan_to_target();
    test_design_variants();
    return testing::summary("tuning_test");
}
