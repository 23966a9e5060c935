#include "phc/purcell.hpp"

#include "phc/rng.hpp"
#include "phc/units.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

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

} // namespace

void BranchingRatios::validate() const
{
    require(zpl >= 0.0 && psb >= 0.0 && nonradiative >= 0.0,
            "branching ratios must be non-negative");
    require(zpl > 0.0, "branching.zpl must be positive");
    const double sum = zpl + psb + nonradiative;
    require(std::abs(sum - 1.0) < 1e-9, "branching ratios must sum to 1");
}

double ideal_purcell(double q, double v_mod)
{
    require(q > 0.0, "ideal_purcell q must be positive");
    require(v_mod > 0.0, "ideal_purcell v_mod must be positive");
    return 3.0 / (4.0 * units::pi * units::pi) * q / v_mod;
}

EmitterRates single_emitter_rates(double purcell, const BranchingRatios& branching)
{
    require(purcell >= 0.0, "single_emitter_rates purcell must be non-negative");
    branching.validate();

    EmitterRates rates;
    rates.zpl_rate = purcell * branching.zpl;
    rates.psb_rate = branching.psb;
    rates.nonradiative_rate = branching.nonradiative;
    rates.total_rate = rates.zpl_rate + rates.psb_rate + rates.nonradiative_rate;
    rates.zpl_fraction = rates.zpl_rate / rates.total_rate;
    const double bare_efficiency = branching.zpl + branching.psb;
    const double efficiency = (rates.zpl_rate + rates.psb_rate) / rates.total_rate;
    rates.efficiency_gain = bare_efficiency > 0.0 ? efficiency / bare_efficiency : 0.0;
    return rates;
}

double spectral_overlap(double cavity_fwhm, double emitter_fwhm, double detuning)
{
    require(cavity_fwhm > 0.0, "spectral_overlap cavity_fwhm must be positive");
    require(emitter_fwhm >= 0.0, "spectral_overlap emitter_fwhm must be non-negative");
    const double joint = cavity_fwhm + emitter_fwhm;
    const double lorentz = 1.0 / (1.0 + (2.0 * detuning / joint) * (2.0 * detuning / joint));
    return cavity_fwhm / joint * lorentz;
}

void EnsembleParams::validate() const
{
    require(q > 0.0, "ensemble.q must be positive");
    require(v_mod > 0.0, "ensemble.v_mod must be positive");
    branching.validate();
    require(emitter_fwhm >= 0.0, "ensemble.emitter_fwhm must be non-negative");
    require(inhomogeneous_sigma >= 0.0, "ensemble.inhomogeneous_sigma must be non-negative");
    require(suppression >= 0.0, "ensemble.suppression must be non-negative");
    require(collection > 0.0 && collection <= 1.0, "ensemble.collection must lie in (0, 1]");
    require(spot_waist > 0.0, "ensemble.spot_waist must be positive");
    require(samples >= 16, "ensemble.samples must be at least 16");
}

namespace
{

struct StoredEps
{
    const EpsilonGrid* grid = nullptr;
    std::array<int, 3> off { 0, 0, 0 };

    double at(int i, int j, int k) const
    {
        return grid->at(i + off[0], j + off[1], k + off[2]);
    }
};

// fractional stored-domain cell coordinate of a world position, folding
// mirrored axes onto the stored non-negative half
double stored_coord(const ModeField& field, int axis, double pos)
{
    const int n = axis == 0 ? field.nx : (axis == 1 ? field.ny : field.nz);
    double u;
    if (field.symmetry[axis] != Mirror::none)
    {
        u = std::abs(pos) / field.dx - 0.5;
    }
    else
    {
        u = pos / field.dx + n / 2.0 - 0.5;
    }
    return std::clamp(u, 0.0, n - 1.000001);
}

std::array<std::complex<double>, 3> interpolate_field(const ModeField& field, double x, double y,
                                                      double z)
{
    const double u = stored_coord(field, 0, x);
    const double v = stored_coord(field, 1, y);
    const double w = stored_coord(field, 2, z);
    const int i0 = std::min(static_cast<int>(u), field.nx - 2 >= 0 ? field.nx - 2 : 0);
    const int j0 = std::min(static_cast<int>(v), field.ny - 2 >= 0 ? field.ny - 2 : 0);
    const int k0 = std::min(static_cast<int>(w), field.nz - 2 >= 0 ? field.nz - 2 : 0);
    const double fu = u - i0;
    const double fv = v - j0;
    const double fw = w - k0;

    std::array<std::complex<double>, 3> out { 0.0, 0.0, 0.0 };
    for (int di = 0; di < 2; ++di)
    {
        const double wu = di == 0 ? 1.0 - fu : fu;
        for (int dj = 0; dj < 2; ++dj)
        {
            const double wv = dj == 0 ? 1.0 - fv : fv;
            for (int dk = 0; dk < 2; ++dk)
            {
                const double ww = dk == 0 ? 1.0 - fw : fw;
                const double weight = wu * wv * ww;
                const std::size_t idx = field.index(i0 + di, j0 + dj, k0 + dk);
                out[0] += weight * field.ex[idx];
                out[1] += weight * field.ey[idx];
                out[2] += weight * field.ez[idx];
            }
        }
    }
    return out;
}

} // namespace

EnsembleResult ensemble_enhancement(const ModeField& field, const EpsilonGrid& grid,
                                    const EnsembleParams& params)
{
    params.validate();
    require(field.nx >= 2 && field.ny >= 2 && field.nz >= 2,
            "ensemble mode field needs at least two cells per axis");
    require(field.dx == grid.dx, "ensemble field and grid spacings differ");

    StoredEps eps;
    eps.grid = &grid;
    const std::array<int, 3> full { grid.nx, grid.ny, grid.nz };
    const std::array<int, 3> stored { field.nx, field.ny, field.nz };
    for (int w = 0; w < 3; ++w)
    {
        const int expected = field.symmetry[w] != Mirror::none ? full[w] / 2 : full[w];
        require(stored[w] == expected,
                "ensemble field dimensions do not match the grid along axis "
                    + std::to_string(w));
        eps.off[w] = field.symmetry[w] != Mirror::none ? full[w] / 2 : 0;
    }

    // normalisation point and the solid region emitters can occupy
    double eps_max = 1.0;
    for (double e : grid.eps)
    {
        eps_max = std::max(eps_max, e);
    }
    require(eps_max > 1.0, "ensemble grid contains no dielectric");
    const double solid_cut = 1.0 + 0.9 * (eps_max - 1.0);

    double peak_u = 0.0;
    double z_solid = 0.0;
    for (int i = 0; i < field.nx; ++i)
    {
        for (int j = 0; j < field.ny; ++j)
        {
            for (int k = 0; k < field.nz; ++k)
            {
                const double e = eps.at(i, j, k);
                const double u = field.energy_density(field.index(i, j, k), e);
                peak_u = std::max(peak_u, u);
                if (e >= solid_cut)
                {
                    z_solid = std::max(z_solid, std::abs(field.center(2, k)) + 0.5 * field.dx);
                }
            }
        }
    }
    require(peak_u > 0.0, "ensemble mode field is identically zero");
    require(z_solid > 0.0, "ensemble grid has no solid cells");

    const double cavity_fwhm = field.wavelength / params.q;
    const double purcell_peak = ideal_purcell(params.q, params.v_mod);
    const double off_zpl = params.suppression * params.branching.zpl;
    const double off_total = off_zpl + params.branching.psb + params.branching.nonradiative;
    const double off_intensity = params.collection * off_zpl / off_total;

    const double sigma_beam = 0.5 * params.spot_waist;

    double sum_i = 0.0;
    double sum_i2 = 0.0;
    double sum_total = 0.0;
    double sum_w = 0.0;
    int rejected = 0;
    const long max_attempts = 10000L * params.samples;
    long attempts = 0;

    for (int sample = 0; sample < params.samples; ++sample)
    {
        Rng rng(mix_seed(params.seed, static_cast<std::uint64_t>(sample)));

        double x = 0.0, y = 0.0, z = 0.0;
        double eps_here = 0.0;
        bool placed = false;
        while (!placed)
        {
            if (++attempts > max_attempts)
            {
                throw std::runtime_error(
                    "ensemble sampling failed: detection spot does not overlap the solid");
            }
            x = sigma_beam * rng.normal();
            y = sigma_beam * rng.normal();
            z = -z_solid + (2.0 * z_solid) * rng.uniform();
            const int ci = static_cast<int>(stored_coord(field, 0, x) + 0.5);
            const int cj = static_cast<int>(stored_coord(field, 1, y) + 0.5);
            const int ck = static_cast<int>(stored_coord(field, 2, z) + 0.5);
            eps_here = eps.at(ci, cj, ck);
            if (eps_here >= solid_cut)
            {
                placed = true;
            }
            else
            {
                ++rejected;
            }
        }

        std::array<double, 3> dipole {};
        if (params.in_plane_dipoles)
        {
            const double phi = 2.0 * units::pi * rng.uniform();
            dipole = { std::cos(phi), std::sin(phi), 0.0 };
        }
        else
        {
            const double cz = 2.0 * rng.uniform() - 1.0;
            const double phi = 2.0 * units::pi * rng.uniform();
            const double sz = std::sqrt(std::max(0.0, 1.0 - cz * cz));
            dipole = { sz * std::cos(phi), sz * std::sin(phi), cz };
        }

        double det = params.detuning;
        if (params.inhomogeneous_sigma > 0.0)
        {
            det += params.inhomogeneous_sigma * rng.normal();
        }
        const double xi = spectral_overlap(cavity_fwhm, params.emitter_fwhm, det);

        const auto e_field = interpolate_field(field, x, y, z);
        const std::complex<double> proj =
            e_field[0] * dipole[0] + e_field[1] * dipole[1] + e_field[2] * dipole[2];
        const double weight = std::clamp(xi * eps_here * std::norm(proj) / peak_u, 0.0, 1.0);

        const double zpl_rate = purcell_peak * weight * params.branching.zpl
                                + params.suppression * (1.0 - weight) * params.branching.zpl;
        const double total =
            zpl_rate + params.branching.psb + params.branching.nonradiative;
        const double intensity = params.collection * zpl_rate / total;

        sum_i += intensity;
        sum_i2 += intensity * intensity;
        sum_total += total;
        sum_w += weight;
    }

    const double n = params.samples;
    const double mean_i = sum_i / n;
    const double var_i = std::max(0.0, sum_i2 / n - mean_i * mean_i);

    EnsembleResult result;
    result.samples = params.samples;
    result.rejected = rejected;
    result.mean_weight = sum_w / n;
    result.enhancement = mean_i / off_intensity;
    result.total_rate_ratio = (sum_total / n) / off_total;
    result.standard_error = std::sqrt(var_i / n) / off_intensity;
    return result;
}

} // namespace phc
