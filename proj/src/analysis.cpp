#include "phc/analysis.hpp"

#include "phc/units.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
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

} // namespace

Spectrum compute_spectrum(const std::vector<double>& samples, double dt, double lambda_min,
                          double lambda_max, int points, SpectrumWindow window)
{
    require(!samples.empty(), "spectrum input series is empty");
    require(dt > 0.0, "spectrum dt must be positive");
    require(lambda_min > 0.0 && lambda_max > lambda_min,
            "spectrum wavelength band must satisfy 0 < min < max");
    require(points >= 2, "spectrum needs at least two evaluation points");

    const std::size_t n = samples.size();
    std::vector<double> windowed(n);
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i)
    {
        double w = 1.0;
        if (window == SpectrumWindow::hann)
        {
            w = 0.5 - 0.5 * std::cos(2.0 * units::pi * i / (n - 1));
        }
        windowed[i] = samples[i] * w;
        norm += w;
    }

    Spectrum spectrum;
    spectrum.wavelength.resize(points);
    spectrum.power.resize(points);
    for (int p = 0; p < points; ++p)
    {
        const double lambda = lambda_min + (lambda_max - lambda_min) * p / (points - 1);
        const double omega = units::omega_from_wavelength(lambda);
        // Goertzel-style single-bin evaluation
        const std::complex<double> rot = std::polar(1.0, omega * dt);
        std::complex<double> phase(1.0, 0.0);
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = 0; i < n; ++i)
        {
            acc += windowed[i] * phase;
            phase *= rot;
        }
        spectrum.wavelength[p] = lambda;
        spectrum.power[p] = std::norm(acc) / (norm * norm);
    }
    return spectrum;
}

double quality_factor(double lambda_c, double delta_lambda)
{
    require(lambda_c > 0.0, "quality_factor centre wavelength must be positive");
    require(delta_lambda > 0.0, "quality_factor linewidth must be positive");
    return lambda_c / delta_lambda;
}

ModeExtraction extract_modes(const std::vector<double>& ringdown, double dt,
                             const PencilOptions& options)
{
    require(dt > 0.0, "extract_modes dt must be positive");
    require(options.max_modes >= 1, "extract_modes max_modes must be at least 1");
    require(options.sv_threshold > 0.0 && options.sv_threshold < 1.0,
            "extract_modes sv_threshold must lie in (0, 1)");
    require(ringdown.size() >= 64, "ring-down series too short for a pencil fit");

    ModeExtraction out;

    // a bounded band lets the record be mixed down to its slowly rotating
    // envelope around the band centre; block averaging then shortens even a
    // very long high-q record to the pencil length without aliasing the band
    const bool banded = options.band_min > 0.0 && std::isfinite(options.band_max);
    const double omega0 = banded
                              ? 0.5 * (units::omega_from_wavelength(options.band_min)
                                       + units::omega_from_wavelength(options.band_max))
                              : 0.0;

    int stride = 1;
    if (options.target_samples > 0
        && ringdown.size() > static_cast<std::size_t>(options.target_samples))
    {
        stride = static_cast<int>(ringdown.size()) / options.target_samples;
    }
    if (banded)
    {
        const double half_band = 0.5 * (units::omega_from_wavelength(options.band_min)
                                        - units::omega_from_wavelength(options.band_max));
        const int alias_cap =
            std::max(1, static_cast<int>(0.45 * units::pi / (half_band * dt)));
        stride = std::min(stride, alias_cap);
    }
    else if (options.band_min > 0.0)
    {
        const int alias_cap = std::max(1, static_cast<int>(0.45 * options.band_min / dt));
        stride = std::min(stride, alias_cap);
    }
    stride = std::max(stride, 1);

    // block averages of x[i]·exp(-i·omega0·t) share the exact pole structure
    // of the raw series; the boxcar only rescales each mode's amplitude
    std::vector<std::complex<double>> x;
    x.reserve(ringdown.size() / stride + 1);
    const std::complex<double> rot = std::polar(1.0, -omega0 * dt);
    std::complex<double> phase(1.0, 0.0);
    for (std::size_t start = 0; start + stride <= ringdown.size(); start += stride)
    {
        std::complex<double> acc(0.0, 0.0);
        for (std::size_t i = start; i < start + static_cast<std::size_t>(stride); ++i)
        {
            acc += ringdown[i] * phase;
            phase *= rot;
        }
        x.push_back(acc / static_cast<double>(stride));
    }
    const int n = static_cast<int>(x.size());
    const double dtd = dt * stride;
    out.report.samples_used = n;
    out.report.decimation = stride;
    if (n < 32)
    {
        out.report.ill_conditioned = true;
        return out;
    }

    const int pencil = n / 3;
    const int rows = n - pencil;
    using Mat = Eigen::MatrixXcd;
    using Vec = Eigen::VectorXcd;
    Mat hankel(rows, pencil + 1);
    for (int r = 0; r < rows; ++r)
    {
        for (int c = 0; c <= pencil; ++c)
        {
            hankel(r, c) = x[r + c];
        }
    }

    Eigen::BDCSVD<Mat> svd(hankel, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0.0)
    {
        out.report.ill_conditioned = true;
        return out;
    }

    int order = 0;
    const int order_cap = std::min({ 2 * options.max_modes + 2, pencil - 1, rows - 1 });
    for (int i = 0; i < sv.size() && order < order_cap; ++i)
    {
        if (sv(i) >= sv(0) * options.sv_threshold)
        {
            order = i + 1;
        }
        else
        {
            break;
        }
    }
    out.report.model_order = order;
    if (order == 0)
    {
        out.report.ill_conditioned = true;
        return out;
    }
    out.report.sv_ratio = sv(order - 1) / sv(0);

    // the right-singular basis spans the conjugated Vandermonde rows of the
    // series, so it is conjugated back before reading off the shift poles
    const Mat v = svd.matrixV().conjugate().leftCols(order);
    const Mat v1 = v.topRows(pencil);
    const Mat v2 = v.bottomRows(pencil);
    const Mat shift = v1.colPivHouseholderQr().solve(v2);
    Eigen::ComplexEigenSolver<Mat> eigen(shift);
    if (eigen.info() != Eigen::Success)
    {
        out.report.ill_conditioned = true;
        return out;
    }

    // every stable pole joins the least-squares basis, including conjugate
    // partners and out-of-band content; dropping them would bias both the
    // in-band amplitudes and the fit residual
    std::vector<std::complex<double>> poles;
    for (int i = 0; i < order; ++i)
    {
        const std::complex<double> z = eigen.eigenvalues()(i);
        const double mag = std::abs(z);
        if (mag > 0.0 && mag <= 1.0 + 1e-6)
        {
            poles.push_back(z);
        }
    }
    if (poles.empty())
    {
        return out;
    }

    Mat vander(n, static_cast<int>(poles.size()));
    for (std::size_t m = 0; m < poles.size(); ++m)
    {
        std::complex<double> p(1.0, 0.0);
        for (int r = 0; r < n; ++r)
        {
            vander(r, static_cast<int>(m)) = p;
            p *= poles[m];
        }
    }
    Vec series(n);
    for (int r = 0; r < n; ++r)
    {
        series(r) = x[r];
    }
    const Vec amps = vander.colPivHouseholderQr().solve(series);
    const double series_norm = series.norm();
    out.report.residual =
        series_norm > 0.0 ? (vander * amps - series).norm() / series_norm : 0.0;
    out.report.ill_conditioned = out.report.residual > 0.2;

    for (std::size_t m = 0; m < poles.size(); ++m)
    {
        const double mag = std::abs(poles[m]);
        const double omega = omega0 + std::arg(poles[m]) / dtd;
        if (omega <= 0.0)
        {
            continue;  // keep the positive-frequency member of each pair
        }
        double decay = -std::log(std::min(mag, 1.0 - 1e-15)) / dtd;
        decay = std::max(decay, 1e-300);
        const double lambda = units::wavelength_from_omega(omega);
        if (options.band_min > 0.0 && lambda < options.band_min)
        {
            continue;
        }
        if (lambda > options.band_max || omega / (2.0 * decay) < options.min_q)
        {
            continue;
        }
        ExtractedMode mode;
        mode.omega = omega;
        mode.decay = decay;
        mode.wavelength = lambda;
        mode.q = mode.omega / (2.0 * mode.decay);
        mode.amplitude = 2.0 * std::abs(amps(static_cast<int>(m)));
        mode.phase = std::arg(amps(static_cast<int>(m)));
        out.modes.push_back(mode);
    }

    // strongest modes win when the pencil finds more than requested
    std::sort(out.modes.begin(), out.modes.end(),
              [](const ExtractedMode& a, const ExtractedMode& b)
              { return a.amplitude > b.amplitude; });
    if (out.modes.size() > static_cast<std::size_t>(options.max_modes))
    {
        out.modes.resize(options.max_modes);
    }
    std::sort(out.modes.begin(), out.modes.end(),
              [](const ExtractedMode& a, const ExtractedMode& b)
              { return a.wavelength < b.wavelength; });
    out.report.kept_modes = static_cast<int>(out.modes.size());
    return out;
}

double mode_volume(const ModeField& field, const EpsilonGrid& grid, double refractive_index)
{
    require(refractive_index >= 1.0, "mode_volume refractive index must be >= 1");
    require(field.wavelength > 0.0, "mode_volume field wavelength must be positive");
    require(field.dx == grid.dx, "mode_volume field and grid spacings differ");

    std::array<int, 3> off { 0, 0, 0 };
    const std::array<int, 3> full { grid.nx, grid.ny, grid.nz };
    const std::array<int, 3> stored { field.nx, field.ny, field.nz };
    double mirror_factor = 1.0;
    for (int w = 0; w < 3; ++w)
    {
        const int expected = field.symmetry[w] != Mirror::none ? full[w] / 2 : full[w];
        require(stored[w] == expected,
                "mode_volume field dimensions do not match the grid along axis "
                    + std::to_string(w));
        if (field.symmetry[w] != Mirror::none)
        {
            off[w] = full[w] / 2;
            mirror_factor *= 2.0;
        }
    }

    double integral = 0.0;
    double peak = 0.0;
    for (int i = 0; i < field.nx; ++i)
    {
        for (int j = 0; j < field.ny; ++j)
        {
            for (int k = 0; k < field.nz; ++k)
            {
                const double eps = grid.at(i + off[0], j + off[1], k + off[2]);
                const double u = field.energy_density(field.index(i, j, k), eps);
                integral += u;
                peak = std::max(peak, u);
            }
        }
    }
    require(peak > 0.0, "mode_volume field is identically zero");

    const double cell = grid.dx * grid.dx * grid.dx;
    const double volume = integral * cell * mirror_factor / peak;
    const double unit = std::pow(field.wavelength / refractive_index, 3.0);
    return volume / unit;
}

ParityResult classify_parity(const ModeField& field)
{
    ParityResult result;

    double px = 0.0;
    double py = 0.0;
    for (std::size_t i = 0; i < field.ex.size(); ++i)
    {
        px += std::norm(field.ex[i]);
        py += std::norm(field.ey[i]);
    }
    result.dominant_axis = py >= px ? 1 : 0;

    if (field.symmetry[1] != Mirror::none)
    {
        result.parity = field.symmetry[1] == Mirror::even ? Parity::even : Parity::odd;
        result.overlap = field.symmetry[1] == Mirror::even ? 1.0 : -1.0;
        return result;
    }

    // full-domain field: correlate against its y mirror image; the normal
    // component keeps its sign under an even mirror, tangential ones flip
    double corr = 0.0;
    double total = 0.0;
    for (int i = 0; i < field.nx; ++i)
    {
        for (int j = 0; j < field.ny; ++j)
        {
            const int jm = field.ny - 1 - j;
            for (int k = 0; k < field.nz; ++k)
            {
                const std::size_t a = field.index(i, j, k);
                const std::size_t b = field.index(i, jm, k);
                corr += (field.ey[a] * std::conj(field.ey[b])).real()
                        - (field.ex[a] * std::conj(field.ex[b])).real()
                        - (field.ez[a] * std::conj(field.ez[b])).real();
                total += std::norm(field.ex[a]) + std::norm(field.ey[a])
                         + std::norm(field.ez[a]);
            }
        }
    }
    if (total <= 0.0)
    {
        return result;
    }
    result.overlap = corr / total;
    if (result.overlap > 0.5)
    {
        result.parity = Parity::even;
    }
    else if (result.overlap < -0.5)
    {
        result.parity = Parity::odd;
    }
    return result;
}

void demix_mode_fields(std::vector<ModeField>& fields, const std::vector<double>& qs)
{
    using Cplx = std::complex<double>;
    using Mat = Eigen::MatrixXcd;

    const int count = static_cast<int>(fields.size());
    require(count == static_cast<int>(qs.size()),
            "demix_mode_fields needs one quality factor per field");
    if (count < 2)
    {
        return;
    }
    const ModeField& head = fields.front();
    require(head.dt > 0.0 && head.steps > 1,
            "demix_mode_fields needs the accumulation window on every field");
    for (const ModeField& field : fields)
    {
        require(field.dt == head.dt && field.steps == head.steps
                    && field.start_time == head.start_time && field.ex.size() == head.ex.size(),
                "demix_mode_fields needs fields from one shared accumulation window");
    }
    for (double q : qs)
    {
        require(q > 0.0, "demix_mode_fields quality factors must be positive");
    }

    const double dt = head.dt;
    const long steps = head.steps;

    // accumulator row i integrates mode column j with the geometric weight
    // sum_m exp((i(w_i - w_j) - g_j) m dt); the counter-rotating part of the
    // real field is smaller by ~1/(w dt steps) and is dropped
    auto window_sum = [&](const Cplx& exponent_step)
    {
        const Cplx r = std::exp(exponent_step);
        if (std::abs(r - 1.0) < 1e-12)
        {
            return Cplx(static_cast<double>(steps), 0.0);
        }
        return (1.0 - std::pow(r, static_cast<double>(steps))) / (1.0 - r);
    };

    Mat mixing(count, count);
    for (int i = 0; i < count; ++i)
    {
        const double wi = units::omega_from_wavelength(fields[i].wavelength);
        for (int j = 0; j < count; ++j)
        {
            const double wj = units::omega_from_wavelength(fields[j].wavelength);
            const double gj = wj / (2.0 * qs[j]);
            mixing(i, j) = window_sum(Cplx(-gj * dt, (wi - wj) * dt));
        }
    }

    const Eigen::JacobiSVD<Mat> svd(mixing, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues()(count - 1);
    const double smax = svd.singularValues()(0);
    if (!(smin > 1e-10 * smax))
    {
        return;  // degenerate wavelengths: inversion would only amplify noise
    }

    // fold the per-accumulator normalisation and start phase into the
    // inverse so one matrix application maps accumulators to pure modes
    Mat unmix = mixing.inverse();
    for (int i = 0; i < count; ++i)
    {
        const double wi = units::omega_from_wavelength(fields[i].wavelength);
        const Cplx undo = 2.0 * static_cast<double>(steps) * dt
                          * std::polar(1.0, -wi * head.start_time);
        unmix.col(i) *= undo;
    }

    const std::size_t cells = head.ex.size();
    std::vector<std::complex<double>*> x(count), y(count), z(count);
    for (int j = 0; j < count; ++j)
    {
        x[j] = fields[j].ex.data();
        y[j] = fields[j].ey.data();
        z[j] = fields[j].ez.data();
    }
    Eigen::VectorXcd in(count);
    for (auto& channel : { x, y, z })
    {
        for (std::size_t c = 0; c < cells; ++c)
        {
            for (int i = 0; i < count; ++i)
            {
                in(i) = channel[i][c];
            }
            const Eigen::VectorXcd out = unmix * in;
            for (int j = 0; j < count; ++j)
            {
                channel[j][c] = out(j);
            }
        }
    }
}

std::vector<ResonantMode> label_modes(std::vector<ResonantMode> modes)
{
    std::sort(modes.begin(), modes.end(),
              [](const ResonantMode& a, const ResonantMode& b)
              { return a.wavelength > b.wavelength; });
    int n_even = 0;
    int n_odd = 0;
    for (ResonantMode& mode : modes)
    {
        if (mode.parity == Parity::even)
        {
            mode.label = "e" + std::to_string(++n_even);
        }
        else if (mode.parity == Parity::odd)
        {
            mode.label = "o" + std::to_string(++n_odd);
        }
        else
        {
            mode.label = "u?";
        }
    }
    int n_unknown = 0;
    for (ResonantMode& mode : modes)
    {
        if (mode.label == "u?")
        {
            mode.label = "u" + std::to_string(++n_unknown);
        }
    }
    return modes;
}

} // namespace phc
