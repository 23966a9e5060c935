#include "phc/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace phc
{

namespace
{

void require(bool ok, const std::string& message)
{
    if (!ok)
    {
        throw std::invalid_argument(message);
    }
}

// nearest-wavelength match among candidates of the same parity; flags the
// match as ambiguous when the runner-up lies within half a linewidth of the
// winner and rejects matches that drift further than the search window
struct MatchResult
{
    int index = -1;
    bool ambiguous = false;
};

MatchResult match_mode(const std::vector<ResonantMode>& candidates, Parity parity,
                       double lambda_ref, double half_linewidth)
{
    const double window = 0.03 * lambda_ref;
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    int best_index = -1;
    for (std::size_t i = 0; i < candidates.size(); ++i)
    {
        if (parity != Parity::indeterminate && candidates[i].parity != parity)
        {
            continue;
        }
        const double dist = std::abs(candidates[i].wavelength - lambda_ref);
        if (dist < best)
        {
            second = best;
            best = dist;
            best_index = static_cast<int>(i);
        }
        else if (dist < second)
        {
            second = dist;
        }
    }
    MatchResult result;
    if (best_index < 0 || best > window)
    {
        result.ambiguous = true;
        return result;
    }
    result.index = best_index;
    result.ambiguous = std::isfinite(second) && (second - best) < half_linewidth;
    return result;
}

double half_linewidth_of(const ResonantMode& mode)
{
    return mode.q > 0.0 ? 0.5 * mode.wavelength / mode.q : 0.0;
}

} // namespace

void CavityDesign::validate() const
{
    material.validate();
    std::visit([](const auto& p) { p.validate(); }, params);
}

DielectricStructure CavityDesign::build() const
{
    validate();
    if (const auto* m7 = std::get_if<M7Params>(&params))
    {
        return build_m7(*m7, material);
    }
    return build_nanobeam(std::get<NanobeamParams>(params), material);
}

void EtchStep::validate() const
{
    require(surface_recession > 0.0, "etch.surface_recession must be positive");
}

CavityDesign etch_once(const CavityDesign& design, const EtchStep& step)
{
    step.validate();
    CavityDesign etched = design;
    const double r = step.surface_recession;
    if (auto* m7 = std::get_if<M7Params>(&etched.params))
    {
        m7->hole_radius += r;
        m7->thickness -= 2.0 * r;
    }
    else
    {
        auto& beam = std::get<NanobeamParams>(etched.params);
        beam.radius_center += r;
        beam.radius_edge += r;
        beam.height -= 2.0 * r;
        beam.width -= 2.0 * r;
    }
    try
    {
        etched.validate();
    }
    catch (const std::invalid_argument& e)
    {
        throw std::invalid_argument(std::string("etch step invalidates the design: ") + e.what());
    }
    return etched;
}

double SensitivityReport::mean_slope() const
{
    double sum = 0.0;
    int count = 0;
    for (const ModeShift& shift : shifts)
    {
        if (!shift.ambiguous)
        {
            sum += shift.slope;
            ++count;
        }
    }
    return count > 0 ? sum / count : 0.0;
}

SensitivityReport sensitivity(const CavityDesign& design, TuneParameter parameter, double delta,
                              const SpectrumSolver& solve)
{
    require(static_cast<bool>(solve), "sensitivity requires a spectrum solver");
    design.validate();

    SensitivityReport report;
    report.parameter = parameter;
    report.delta = delta;

    const std::vector<ResonantMode> base = solve(design);
    if (delta == 0.0)
    {
        for (const ResonantMode& mode : base)
        {
            report.shifts.push_back(ModeShift { mode.label, mode.parity, mode.wavelength,
                                                mode.wavelength, 0.0, false });
        }
        return report;
    }

    CavityDesign changed = design;
    if (auto* m7 = std::get_if<M7Params>(&changed.params))
    {
        if (parameter == TuneParameter::all_radii)
        {
            m7->hole_radius += delta;
        }
        else
        {
            m7->thickness += delta;
        }
    }
    else
    {
        auto& beam = std::get<NanobeamParams>(changed.params);
        if (parameter == TuneParameter::all_radii)
        {
            beam.radius_center += delta;
            beam.radius_edge += delta;
        }
        else
        {
            beam.height += delta;
        }
    }
    changed.validate();

    const std::vector<ResonantMode> perturbed = solve(changed);
    for (const ResonantMode& mode : base)
    {
        ModeShift shift;
        shift.label = mode.label;
        shift.parity = mode.parity;
        shift.lambda_base = mode.wavelength;
        const MatchResult match =
            match_mode(perturbed, mode.parity, mode.wavelength, half_linewidth_of(mode));
        if (match.index < 0 || match.ambiguous)
        {
            shift.ambiguous = true;
        }
        else
        {
            shift.lambda_perturbed = perturbed[match.index].wavelength;
            shift.slope = (shift.lambda_perturbed - shift.lambda_base) / delta;
        }
        report.shifts.push_back(shift);
    }
    return report;
}

std::vector<TracePoint> TuningTrace::track(const std::string& label) const
{
    std::vector<TracePoint> result;
    for (const TracePoint& point : points)
    {
        if (point.label == label)
        {
            result.push_back(point);
        }
    }
    return result;
}

std::vector<std::string> TuningTrace::labels() const
{
    std::vector<std::string> result;
    for (const TracePoint& point : points)
    {
        if (std::find(result.begin(), result.end(), point.label) == result.end())
        {
            result.push_back(point.label);
        }
    }
    return result;
}

TuningTrace etch_sequence(const CavityDesign& design, const EtchStep& step, int n_steps,
                          const SpectrumSolver& solve)
{
    require(static_cast<bool>(solve), "etch_sequence requires a spectrum solver");
    require(n_steps >= 1, "etch_sequence needs at least one step");
    step.validate();

    TuningTrace trace;
    trace.designs.push_back(design);

    struct Tracked
    {
        std::string label;
        Parity parity;
        double wavelength;
        double half_linewidth;
        bool alive;
    };
    std::vector<Tracked> tracked;

    const std::vector<ResonantMode> base = solve(design);
    for (const ResonantMode& mode : base)
    {
        tracked.push_back(
            Tracked { mode.label, mode.parity, mode.wavelength, half_linewidth_of(mode), true });
        trace.points.push_back(TracePoint { 0, mode.label, mode.wavelength, mode.q });
    }

    for (int n = 1; n <= n_steps; ++n)
    {
        trace.designs.push_back(etch_once(trace.designs.back(), step));
        const std::vector<ResonantMode> modes = solve(trace.designs.back());
        for (Tracked& mode : tracked)
        {
            if (!mode.alive)
            {
                continue;
            }
            const MatchResult match =
                match_mode(modes, mode.parity, mode.wavelength, mode.half_linewidth);
            if (match.index < 0 || match.ambiguous)
            {
                mode.alive = false;
                continue;
            }
            const ResonantMode& found = modes[match.index];
            mode.wavelength = found.wavelength;
            mode.half_linewidth = half_linewidth_of(found);
            trace.points.push_back(TracePoint { n, mode.label, found.wavelength, found.q });
        }
    }
    return trace;
}

TuningPlan plan_to_target(const CavityDesign& design, const std::string& mode_label,
                          double target_lambda, const EtchStep& step, const SpectrumSolver& solve,
                          int max_steps)
{
    require(static_cast<bool>(solve), "plan_to_target requires a spectrum solver");
    require(target_lambda > 0.0, "plan_to_target target wavelength must be positive");
    require(max_steps >= 1, "plan_to_target.max_steps must be at least 1");
    step.validate();

    TuningPlan plan;

    const std::vector<ResonantMode> base = solve(design);
    plan.solver_calls = 1;
    const auto it = std::find_if(base.begin(), base.end(), [&](const ResonantMode& mode)
                                 { return mode.label == mode_label; });
    if (it == base.end())
    {
        throw std::runtime_error("plan_to_target: no mode labelled '" + mode_label +
                                 "' in the base spectrum");
    }
    const Parity parity = it->parity;
    plan.start_wavelength = it->wavelength;
    plan.tolerance = half_linewidth_of(*it);
    if (target_lambda > plan.start_wavelength)
    {
        throw std::invalid_argument("cannot red-tune: target " + std::to_string(target_lambda) +
                                    " nm lies above the current resonance at " +
                                    std::to_string(plan.start_wavelength) + " nm");
    }

    double lambda = plan.start_wavelength;
    double half_linewidth = plan.tolerance;
    if (lambda <= target_lambda + half_linewidth)
    {
        plan.predicted_wavelength = lambda;
        return plan;
    }

    // first-step probe fixes the per-step slope for the extrapolation
    CavityDesign current = etch_once(design, step);
    std::vector<ResonantMode> modes = solve(current);
    ++plan.solver_calls;
    int n = 1;
    MatchResult match = match_mode(modes, parity, lambda, half_linewidth);
    if (match.index < 0 || match.ambiguous)
    {
        throw std::runtime_error("plan_to_target: lost track of mode '" + mode_label +
                                 "' after the first etch step");
    }
    double per_step = lambda - modes[match.index].wavelength;
    lambda = modes[match.index].wavelength;
    half_linewidth = half_linewidth_of(modes[match.index]);

    while (lambda > target_lambda + half_linewidth)
    {
        if (per_step <= 0.0)
        {
            throw std::runtime_error("plan_to_target: etching does not blue-shift mode '" +
                                     mode_label + "'");
        }
        const int jump = std::max(
            1, static_cast<int>(std::ceil((lambda - target_lambda - half_linewidth) / per_step)));
        if (n + jump > max_steps)
        {
            throw std::runtime_error("plan_to_target: target not reachable within " +
                                     std::to_string(max_steps) + " etch steps");
        }
        for (int i = 0; i < jump; ++i)
        {
            current = etch_once(current, step);
        }
        const std::vector<ResonantMode> probe = solve(current);
        ++plan.solver_calls;
        match = match_mode(probe, parity, lambda - jump * per_step, half_linewidth);
        if (match.index < 0 || match.ambiguous)
        {
            throw std::runtime_error("plan_to_target: lost track of mode '" + mode_label +
                                     "' during extrapolation");
        }
        per_step = (lambda - probe[match.index].wavelength) / jump;
        lambda = probe[match.index].wavelength;
        half_linewidth = half_linewidth_of(probe[match.index]);
        n += jump;
    }

    plan.steps_required = n;
    plan.predicted_wavelength = lambda;
    plan.tolerance = half_linewidth;
    return plan;
}

} // namespace phc
