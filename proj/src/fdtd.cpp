#include "phc/fdtd.hpp"

#include "phc/units.hpp"

#include <algorithm>
#include <cmath>
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

// Gaussian-envelope carrier; tau is set so that fractional_bandwidth is the
// full width at half maximum of the pulse power spectrum over the carrier
// frequency
struct Pulse
{
    double omega = 0.0;
    double tau = 0.0;
    double t0 = 0.0;
    double amplitude = 0.0;

    static Pulse make(const PulseSpec& spec)
    {
        require(spec.wavelength > 0.0, "pulse wavelength must be positive");
        require(spec.fractional_bandwidth > 0.0 && spec.fractional_bandwidth <= 2.0,
                "pulse fractional_bandwidth must lie in (0, 2]");
        require(spec.amplitude != 0.0, "pulse amplitude must be non-zero");
        Pulse p;
        p.omega = units::omega_from_wavelength(spec.wavelength);
        const double df = spec.fractional_bandwidth / spec.wavelength;
        p.tau = std::sqrt(std::log(2.0)) / (units::pi * df);
        p.t0 = 5.5 * p.tau;
        p.amplitude = spec.amplitude;
        return p;
    }

    double off_time() const { return 2.0 * t0; }

    double value(double t) const
    {
        if (t < 0.0 || t > off_time())
        {
            return 0.0;
        }
        const double u = (t - t0) / tau;
        return amplitude * std::exp(-0.5 * u * u) * std::cos(omega * (t - t0));
    }
};

struct ResolvedDipole
{
    std::size_t node = 0;
    int axis = 0;
    Pulse pulse;
};

struct ResolvedPlane
{
    int normal_axis = 0;
    int field_axis = 0;
    int plane_index = 0;
    Pulse pulse;
};

struct ResolvedProbe
{
    std::size_t node = 0;
    int axis = 0;
};

struct Range
{
    int lo = 0;
    int hi = 0;  // exclusive
};

} // namespace

double ProbeSeries::time_fs(int n) const
{
    return units::ct_to_fs((n + 1) * dt);
}

std::vector<double> ProbeSeries::ringdown(int probe) const
{
    const std::vector<double>& s = samples.at(probe);
    if (ringdown_start >= static_cast<int>(s.size()))
    {
        return {};
    }
    return std::vector<double>(s.begin() + ringdown_start, s.end());
}

double ModeField::center(int axis, int i) const
{
    const int n = axis == 0 ? nx : (axis == 1 ? ny : nz);
    if (symmetry[axis] != Mirror::none)
    {
        return (i + 0.5) * dx;
    }
    return (i - n / 2 + 0.5) * dx;
}

double ModeField::energy_density(std::size_t idx, double eps) const
{
    return eps * (std::norm(ex[idx]) + std::norm(ey[idx]) + std::norm(ez[idx]));
}

struct SimState::Impl
{
    // stored-domain cell counts and full-grid placement
    int sx = 0, sy = 0, sz = 0;
    std::array<int, 3> full { 0, 0, 0 };
    std::array<int, 3> off { 0, 0, 0 };
    std::array<Mirror, 3> sym { Mirror::none, Mirror::none, Mirror::none };
    double dx = 0.0;
    double dt = 0.0;
    double ch = 0.0;  // dt / dx

    // node strides; every component array shares the same (sx+1)(sy+1)(sz+1)
    // layout indexed i*s1 + j*s2 + k
    std::size_t s1 = 0, s2 = 0;
    std::size_t nodes = 0;

    std::vector<double> ex, ey, ez, hx, hy, hz;
    std::vector<double> cex, cey, cez;  // dt / (eps * dx) at the component node

    // boundary behaviour per axis and face
    std::array<bool, 3> pml_low { false, false, false };
    std::array<bool, 3> pml_high { false, false, false };
    std::array<bool, 3> pmc_low { false, false, false };
    std::array<bool, 3> pmc_high { false, false, false };
    int npml = 0;

    // update index bounds for tangential E components: along each axis, the
    // boundary node is included only where the face is a magnetic wall
    std::array<int, 3> t_lo { 1, 1, 1 };
    std::array<int, 3> t_hi { 0, 0, 0 };

    // split-field accumulators and their graded coefficients, one pair of
    // tables per axis at integer (E) and half (H) positions
    std::array<std::vector<double>, 3> be, ae, bh, ah;
    std::array<std::vector<Range>, 3> e_slabs, h_slabs;
    std::vector<double> psi_eyx, psi_ezx, psi_exy, psi_ezy, psi_exz, psi_eyz;
    std::vector<double> psi_hyx, psi_hzx, psi_hxy, psi_hzy, psi_hxz, psi_hyz;

    std::vector<ResolvedDipole> dipoles;
    std::vector<ResolvedPlane> planes;
    double all_off_time = 0.0;

    std::vector<ResolvedProbe> probe_nodes;
    ProbeSeries series;

    long n = 0;  // completed steps

    std::vector<double> dft_lambda;
    std::vector<std::vector<std::complex<double>>> dft_ex, dft_ey, dft_ez;
    std::vector<std::complex<double>> dft_phase, dft_rot;
    double dft_duration = 0.0;
    long dft_anchor_step = 0;

    std::size_t idx(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i) * s1 + static_cast<std::size_t>(j) * s2 + k;
    }

    void update_e();
    void update_h();
    void apply_pml_e();
    void apply_pml_h();
    void inject(double t);
    void accumulate_dft();
    void record();
};

namespace
{

// four-cell average of the permittivity around a tangential field edge;
// indices are clamped at the stored-domain boundary, which reproduces the
// mirror image where a mirror is active
double edge_eps(const EpsilonGrid& grid, const std::array<int, 3>& off, int ci, int cj, int ck,
                int axis_a, int da, int axis_b, int db, int sx, int sy, int sz)
{
    auto cell = [&](int i, int j, int k)
    {
        i = std::clamp(i, 0, sx - 1);
        j = std::clamp(j, 0, sy - 1);
        k = std::clamp(k, 0, sz - 1);
        return grid.at(i + off[0], j + off[1], k + off[2]);
    };
    std::array<int, 3> lo { ci, cj, ck };
    std::array<int, 3> hi { ci, cj, ck };
    lo[axis_a] -= da;
    lo[axis_b] -= db;
    std::array<int, 3> mid_a = hi;
    mid_a[axis_a] -= da;
    std::array<int, 3> mid_b = hi;
    mid_b[axis_b] -= db;
    return 0.25
           * ((cell(lo[0], lo[1], lo[2]) + cell(mid_a[0], mid_a[1], mid_a[2]))
              + (cell(mid_b[0], mid_b[1], mid_b[2]) + cell(hi[0], hi[1], hi[2])));
}

} // namespace

SimState::SimState(const EpsilonGrid& grid, const SimConfig& config)
    : impl_(std::make_unique<Impl>())
{
    Impl& s = *impl_;

    require(grid.nx > 0 && grid.ny > 0 && grid.nz > 0 && grid.dx > 0.0,
            "simulation grid is empty");
    require(grid.eps.size() == grid.cell_count(), "grid cell data does not match dimensions");
    require(config.courant > 0.0 && config.courant <= 0.57735026918962577,
            "courant factor exceeds the 3D stability bound 1/sqrt(3)");
    require(config.pml.layers >= 0, "pml.layers must be non-negative");
    require(config.pml.order >= 1, "pml.order must be at least 1");
    require(config.pml.sigma_scale > 0.0, "pml.sigma_scale must be positive");
    require(config.pml.alpha >= 0.0, "pml.alpha must be non-negative");
    for (double e : grid.eps)
    {
        require(e > 0.0, "grid permittivity must be positive");
    }

    s.dx = grid.dx;
    s.dt = config.courant * grid.dx;
    s.ch = s.dt / s.dx;
    s.sym = config.symmetry;
    s.full = { grid.nx, grid.ny, grid.nz };
    s.npml = config.pml.layers;

    const std::array<int, 3> dims { grid.nx, grid.ny, grid.nz };
    std::array<int, 3> stored {};
    for (int w = 0; w < 3; ++w)
    {
        if (config.symmetry[w] != Mirror::none)
        {
            require(dims[w] % 2 == 0, "mirror axes need an even cell count");
            stored[w] = dims[w] / 2;
            s.off[w] = dims[w] / 2;
            s.pml_low[w] = false;
            s.pmc_low[w] = config.symmetry[w] == Mirror::odd;
            s.pml_high[w] = config.absorb[w] && s.npml > 0;
            s.pmc_high[w] = !s.pml_high[w] && config.wall[w] == WallKind::pmc;
        }
        else
        {
            stored[w] = dims[w];
            s.off[w] = 0;
            const bool absorb = config.absorb[w] && s.npml > 0;
            s.pml_low[w] = absorb;
            s.pml_high[w] = absorb;
            s.pmc_low[w] = !absorb && config.wall[w] == WallKind::pmc;
            s.pmc_high[w] = !absorb && config.wall[w] == WallKind::pmc;
        }
    }
    s.sx = stored[0];
    s.sy = stored[1];
    s.sz = stored[2];

    for (int w = 0; w < 3; ++w)
    {
        const int needed = (s.pml_low[w] ? s.npml + 2 : 2) + (s.pml_high[w] ? s.npml + 2 : 2);
        require(stored[w] >= needed, "grid too small for the absorbing layers along axis "
                                         + std::to_string(w));
    }

    // mirror axes demand a mirror-symmetric permittivity
    for (int w = 0; w < 3; ++w)
    {
        if (config.symmetry[w] == Mirror::none)
        {
            continue;
        }
        double worst = 0.0;
        std::array<int, 3> at { 0, 0, 0 };
        for (int i = 0; i < grid.nx; ++i)
        {
            const int mi = w == 0 ? grid.nx - 1 - i : i;
            for (int j = 0; j < grid.ny; ++j)
            {
                const int mj = w == 1 ? grid.ny - 1 - j : j;
                for (int k = 0; k < grid.nz; ++k)
                {
                    const int mk = w == 2 ? grid.nz - 1 - k : k;
                    const double d = std::abs(grid.at(i, j, k) - grid.at(mi, mj, mk));
                    if (d > worst)
                    {
                        worst = d;
                        at = { i, j, k };
                    }
                }
            }
        }
        if (worst > 1e-12)
        {
            throw std::invalid_argument(
                "grid is not mirror-symmetric along axis " + std::to_string(w)
                + ": permittivity deviates by " + std::to_string(worst) + " at cell ("
                + std::to_string(at[0]) + ", " + std::to_string(at[1]) + ", "
                + std::to_string(at[2]) + ")");
        }
    }

    s.s2 = static_cast<std::size_t>(s.sz) + 1;
    s.s1 = static_cast<std::size_t>(s.sy + 1) * s.s2;
    s.nodes = static_cast<std::size_t>(s.sx + 1) * s.s1;

    for (auto* f : { &s.ex, &s.ey, &s.ez, &s.hx, &s.hy, &s.hz })
    {
        f->assign(s.nodes, 0.0);
    }

    for (int w = 0; w < 3; ++w)
    {
        s.t_lo[w] = s.pmc_low[w] ? 0 : 1;
        s.t_hi[w] = stored[w] + (s.pmc_high[w] ? 1 : 0);
    }

    // permittivity coefficients per component node
    s.cex.assign(s.nodes, 0.0);
    s.cey.assign(s.nodes, 0.0);
    s.cez.assign(s.nodes, 0.0);
    const double cdt = s.dt / s.dx;
#pragma omp parallel for schedule(static)
    for (int i = 0; i <= s.sx; ++i)
    {
        for (int j = 0; j <= s.sy; ++j)
        {
            for (int k = 0; k <= s.sz; ++k)
            {
                const std::size_t node = s.idx(i, j, k);
                const int ci = std::min(i, s.sx - 1);
                const int cj = std::min(j, s.sy - 1);
                const int ck = std::min(k, s.sz - 1);
                s.cex[node] = cdt
                              / edge_eps(grid, s.off, ci, j, k, 1, 1, 2, 1, s.sx, s.sy, s.sz);
                s.cey[node] = cdt
                              / edge_eps(grid, s.off, i, cj, k, 0, 1, 2, 1, s.sx, s.sy, s.sz);
                s.cez[node] = cdt
                              / edge_eps(grid, s.off, i, j, ck, 0, 1, 1, 1, s.sx, s.sy, s.sz);
            }
        }
    }

    // graded absorbing-layer tables
    const double sigma_max = config.pml.sigma_scale * 0.8 * (config.pml.order + 1) / s.dx;
    const double alpha = config.pml.alpha;
    auto coeff_pair = [&](double depth_frac, double& b, double& a)
    {
        const double sigma = sigma_max * std::pow(depth_frac, config.pml.order);
        b = std::exp(-(sigma + alpha) * s.dt);
        if (sigma + alpha > 0.0)
        {
            a = sigma * (b - 1.0) / (sigma + alpha);
        }
        else
        {
            b = 1.0;
            a = 0.0;
        }
    };
    for (int w = 0; w < 3; ++w)
    {
        const int sw = stored[w];
        s.be[w].assign(sw + 1, 1.0);
        s.ae[w].assign(sw + 1, 0.0);
        s.bh[w].assign(sw + 1, 1.0);
        s.ah[w].assign(sw + 1, 0.0);
        if (s.npml == 0)
        {
            continue;
        }
        if (s.pml_low[w])
        {
            for (int i = 1; i < s.npml; ++i)
            {
                coeff_pair(static_cast<double>(s.npml - i) / s.npml, s.be[w][i], s.ae[w][i]);
            }
            for (int i = 0; i < s.npml; ++i)
            {
                coeff_pair((s.npml - i - 0.5) / s.npml, s.bh[w][i], s.ah[w][i]);
            }
            s.e_slabs[w].push_back(Range { 1, s.npml });
            s.h_slabs[w].push_back(Range { 0, s.npml });
        }
        if (s.pml_high[w])
        {
            for (int i = sw - s.npml + 1; i < sw; ++i)
            {
                coeff_pair(static_cast<double>(i - (sw - s.npml)) / s.npml, s.be[w][i],
                           s.ae[w][i]);
            }
            for (int i = sw - s.npml; i < sw; ++i)
            {
                coeff_pair((i + 0.5 - (sw - s.npml)) / s.npml, s.bh[w][i], s.ah[w][i]);
            }
            s.e_slabs[w].push_back(Range { sw - s.npml + 1, sw });
            s.h_slabs[w].push_back(Range { sw - s.npml, sw });
        }
    }
    const bool any_pml_x = s.pml_low[0] || s.pml_high[0];
    const bool any_pml_y = s.pml_low[1] || s.pml_high[1];
    const bool any_pml_z = s.pml_low[2] || s.pml_high[2];
    if (any_pml_x)
    {
        s.psi_eyx.assign(s.nodes, 0.0);
        s.psi_ezx.assign(s.nodes, 0.0);
        s.psi_hyx.assign(s.nodes, 0.0);
        s.psi_hzx.assign(s.nodes, 0.0);
    }
    if (any_pml_y)
    {
        s.psi_exy.assign(s.nodes, 0.0);
        s.psi_ezy.assign(s.nodes, 0.0);
        s.psi_hxy.assign(s.nodes, 0.0);
        s.psi_hzy.assign(s.nodes, 0.0);
    }
    if (any_pml_z)
    {
        s.psi_exz.assign(s.nodes, 0.0);
        s.psi_eyz.assign(s.nodes, 0.0);
        s.psi_hxz.assign(s.nodes, 0.0);
        s.psi_hyz.assign(s.nodes, 0.0);
    }

    // resolve sources and probes onto component nodes
    auto resolve_node = [&](const std::array<double, 3>& pos, int axis, const char* what)
    {
        require(axis >= 0 && axis <= 2, std::string(what) + " axis must be 0, 1 or 2");
        std::array<int, 3> node {};
        for (int w = 0; w < 3; ++w)
        {
            // the driven component sits at half-integer coordinates along its
            // own axis and integer coordinates along the others
            const double half = w == axis ? 0.5 : 0.0;
            const double u = pos[w] / s.dx + dims[w] / 2.0 - s.off[w] - half;
            const int i = static_cast<int>(std::lround(u));
            const int sw = stored[w];
            // tangential components on a PMC face are live nodes, so sources
            // and probes may sit on the face itself
            int lo = s.pmc_low[w] ? 0 : 1;
            int hi = s.pmc_high[w] ? sw : sw - 1;
            if (w == axis)
            {
                lo = 0;
                hi = sw - 1;
            }
            if (s.pml_low[w])
            {
                lo = s.npml + 1;
            }
            if (s.pml_high[w])
            {
                hi = sw - s.npml - 1;
            }
            if (i < lo || i > hi)
            {
                throw std::invalid_argument(
                    std::string(what) + " at coordinate " + std::to_string(pos[w])
                    + " along axis " + std::to_string(w)
                    + " falls outside the usable stored domain"
                    + (s.sym[w] != Mirror::none ? " (mirror keeps the non-negative half)" : ""));
            }
            node[w] = i;
        }
        return s.idx(node[0], node[1], node[2]);
    };

    for (const DipoleSource& src : config.sources)
    {
        ResolvedDipole r;
        r.node = resolve_node(src.position, src.axis, "source");
        r.axis = src.axis;
        r.pulse = Pulse::make(src.pulse);
        s.dipoles.push_back(r);
        s.all_off_time = std::max(s.all_off_time, r.pulse.off_time());
    }
    for (const PlaneSource& src : config.plane_sources)
    {
        require(src.normal_axis >= 0 && src.normal_axis <= 2,
                "plane source normal_axis must be 0, 1 or 2");
        require(src.field_axis >= 0 && src.field_axis <= 2,
                "plane source field_axis must be 0, 1 or 2");
        require(src.field_axis != src.normal_axis,
                "plane source field must be transverse to its normal");
        ResolvedPlane r;
        r.normal_axis = src.normal_axis;
        r.field_axis = src.field_axis;
        const int w = src.normal_axis;
        const double u = src.position / s.dx + dims[w] / 2.0 - s.off[w];
        r.plane_index = static_cast<int>(std::lround(u));
        const int lo = s.pml_low[w] ? s.npml + 1 : 1;
        const int hi = stored[w] - (s.pml_high[w] ? s.npml + 1 : 1);
        require(r.plane_index >= lo && r.plane_index <= hi,
                "plane source position falls outside the usable stored domain");
        r.pulse = Pulse::make(src.pulse);
        s.planes.push_back(r);
        s.all_off_time = std::max(s.all_off_time, r.pulse.off_time());
    }
    for (const FieldProbe& probe : config.probes)
    {
        ResolvedProbe r;
        r.node = resolve_node(probe.position, probe.axis, "probe");
        r.axis = probe.axis;
        s.probe_nodes.push_back(r);
    }
    s.series.dt = s.dt;
    s.series.probes = config.probes;
    s.series.samples.assign(config.probes.size(), {});
}

SimState::~SimState() = default;
SimState::SimState(SimState&&) noexcept = default;
SimState& SimState::operator=(SimState&&) noexcept = default;

void SimState::Impl::update_e()
{
    const double* __restrict hxp = hx.data();
    const double* __restrict hyp = hy.data();
    const double* __restrict hzp = hz.data();
    const std::size_t S1 = s1;
    const std::size_t S2 = s2;

    // Ex lives at (i+1/2, j, k); tangential walls along y and z
    {
        double* __restrict e = ex.data();
        const double* __restrict c = cex.data();
        const int jl = t_lo[1], jh = t_hi[1], kl = t_lo[2], kh = t_hi[2];
#pragma omp parallel for schedule(static)
        for (int i = 0; i < sx; ++i)
        {
            for (int j = jl; j < jh; ++j)
            {
                const int jmode = j == 0 ? -1 : (j == sy ? 1 : 0);
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = kl; k < kh; ++k)
                {
                    const std::size_t nn = base + k;
                    const double dhz = jmode == 0 ? hzp[nn] - hzp[nn - S2]
                                                  : (jmode < 0 ? 2.0 * hzp[nn]
                                                               : -2.0 * hzp[nn - S2]);
                    const double dhy = k == 0 ? 2.0 * hyp[nn]
                                              : (k == sz ? -2.0 * hyp[nn - 1]
                                                         : hyp[nn] - hyp[nn - 1]);
                    e[nn] += c[nn] * (dhz - dhy);
                }
            }
        }
    }

    // Ey lives at (i, j+1/2, k); tangential walls along x and z
    {
        double* __restrict e = ey.data();
        const double* __restrict c = cey.data();
        const int il = t_lo[0], ih = t_hi[0], kl = t_lo[2], kh = t_hi[2];
#pragma omp parallel for schedule(static)
        for (int i = il; i < ih; ++i)
        {
            const int imode = i == 0 ? -1 : (i == sx ? 1 : 0);
            for (int j = 0; j < sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = kl; k < kh; ++k)
                {
                    const std::size_t nn = base + k;
                    const double dhx = k == 0 ? 2.0 * hxp[nn]
                                              : (k == sz ? -2.0 * hxp[nn - 1]
                                                         : hxp[nn] - hxp[nn - 1]);
                    const double dhz = imode == 0 ? hzp[nn] - hzp[nn - S1]
                                                  : (imode < 0 ? 2.0 * hzp[nn]
                                                               : -2.0 * hzp[nn - S1]);
                    e[nn] += c[nn] * (dhx - dhz);
                }
            }
        }
    }

    // Ez lives at (i, j, k+1/2); tangential walls along x and y
    {
        double* __restrict e = ez.data();
        const double* __restrict c = cez.data();
        const int il = t_lo[0], ih = t_hi[0], jl = t_lo[1], jh = t_hi[1];
#pragma omp parallel for schedule(static)
        for (int i = il; i < ih; ++i)
        {
            const int imode = i == 0 ? -1 : (i == sx ? 1 : 0);
            for (int j = jl; j < jh; ++j)
            {
                const int jmode = j == 0 ? -1 : (j == sy ? 1 : 0);
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k < sz; ++k)
                {
                    const std::size_t nn = base + k;
                    const double dhy = imode == 0 ? hyp[nn] - hyp[nn - S1]
                                                  : (imode < 0 ? 2.0 * hyp[nn]
                                                               : -2.0 * hyp[nn - S1]);
                    const double dhx = jmode == 0 ? hxp[nn] - hxp[nn - S2]
                                                  : (jmode < 0 ? 2.0 * hxp[nn]
                                                               : -2.0 * hxp[nn - S2]);
                    e[nn] += c[nn] * (dhy - dhx);
                }
            }
        }
    }
}

void SimState::Impl::update_h()
{
    const double* __restrict exp_ = ex.data();
    const double* __restrict eyp = ey.data();
    const double* __restrict ezp = ez.data();
    const std::size_t S1 = s1;
    const std::size_t S2 = s2;
    const double c = ch;

    {
        double* __restrict h = hx.data();
#pragma omp parallel for schedule(static)
        for (int i = 0; i <= sx; ++i)
        {
            for (int j = 0; j < sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k < sz; ++k)
                {
                    const std::size_t nn = base + k;
                    h[nn] += c * ((eyp[nn + 1] - eyp[nn]) - (ezp[nn + S2] - ezp[nn]));
                }
            }
        }
    }
    {
        double* __restrict h = hy.data();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < sx; ++i)
        {
            for (int j = 0; j <= sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k < sz; ++k)
                {
                    const std::size_t nn = base + k;
                    h[nn] += c * ((ezp[nn + S1] - ezp[nn]) - (exp_[nn + 1] - exp_[nn]));
                }
            }
        }
    }
    {
        double* __restrict h = hz.data();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < sx; ++i)
        {
            for (int j = 0; j < sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k <= sz; ++k)
                {
                    const std::size_t nn = base + k;
                    h[nn] += c * ((exp_[nn + S2] - exp_[nn]) - (eyp[nn + S1] - eyp[nn]));
                }
            }
        }
    }
}

void SimState::Impl::apply_pml_e()
{
    const double* __restrict hxp = hx.data();
    const double* __restrict hyp = hy.data();
    const double* __restrict hzp = hz.data();
    const std::size_t S1 = s1;
    const std::size_t S2 = s2;

    for (const Range& r : e_slabs[0])
    {
        // x-graded corrections act on Ey (MINUS d/dx Hz) and Ez (PLUS d/dx Hy)
#pragma omp parallel for schedule(static)
        for (int i = r.lo; i < r.hi; ++i)
        {
            const double b = be[0][i];
            const double a = ae[0][i];
            for (int j = 0; j < sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = t_lo[2]; k < t_hi[2]; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = hzp[nn] - hzp[nn - S1];
                    psi_eyx[nn] = b * psi_eyx[nn] + a * d;
                    ey[nn] -= cey[nn] * psi_eyx[nn];
                }
            }
            for (int j = t_lo[1]; j < t_hi[1]; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k < sz; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = hyp[nn] - hyp[nn - S1];
                    psi_ezx[nn] = b * psi_ezx[nn] + a * d;
                    ez[nn] += cez[nn] * psi_ezx[nn];
                }
            }
        }
    }

    for (const Range& r : e_slabs[1])
    {
        // y-graded corrections act on Ex (PLUS d/dy Hz) and Ez (MINUS d/dy Hx)
#pragma omp parallel for schedule(static)
        for (int i = 0; i < sx; ++i)
        {
            for (int j = r.lo; j < r.hi; ++j)
            {
                const double b = be[1][j];
                const double a = ae[1][j];
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = t_lo[2]; k < t_hi[2]; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = hzp[nn] - hzp[nn - S2];
                    psi_exy[nn] = b * psi_exy[nn] + a * d;
                    ex[nn] += cex[nn] * psi_exy[nn];
                }
            }
        }
#pragma omp parallel for schedule(static)
        for (int i = t_lo[0]; i < t_hi[0]; ++i)
        {
            for (int j = r.lo; j < r.hi; ++j)
            {
                const double b = be[1][j];
                const double a = ae[1][j];
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k < sz; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = hxp[nn] - hxp[nn - S2];
                    psi_ezy[nn] = b * psi_ezy[nn] + a * d;
                    ez[nn] -= cez[nn] * psi_ezy[nn];
                }
            }
        }
    }

    for (const Range& r : e_slabs[2])
    {
        // z-graded corrections act on Ex (MINUS d/dz Hy) and Ey (PLUS d/dz Hx)
#pragma omp parallel for schedule(static)
        for (int i = 0; i < sx; ++i)
        {
            for (int j = t_lo[1]; j < t_hi[1]; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = r.lo; k < r.hi; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = hyp[nn] - hyp[nn - 1];
                    psi_exz[nn] = be[2][k] * psi_exz[nn] + ae[2][k] * d;
                    ex[nn] -= cex[nn] * psi_exz[nn];
                }
            }
        }
#pragma omp parallel for schedule(static)
        for (int i = t_lo[0]; i < t_hi[0]; ++i)
        {
            for (int j = 0; j < sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = r.lo; k < r.hi; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = hxp[nn] - hxp[nn - 1];
                    psi_eyz[nn] = be[2][k] * psi_eyz[nn] + ae[2][k] * d;
                    ey[nn] += cey[nn] * psi_eyz[nn];
                }
            }
        }
    }
}

void SimState::Impl::apply_pml_h()
{
    const double* __restrict exp_ = ex.data();
    const double* __restrict eyp = ey.data();
    const double* __restrict ezp = ez.data();
    const std::size_t S1 = s1;
    const std::size_t S2 = s2;
    const double c = ch;

    for (const Range& r : h_slabs[0])
    {
        // x-graded corrections act on Hy (PLUS d/dx Ez) and Hz (MINUS d/dx Ey)
#pragma omp parallel for schedule(static)
        for (int i = r.lo; i < r.hi; ++i)
        {
            const double b = bh[0][i];
            const double a = ah[0][i];
            for (int j = 0; j <= sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k < sz; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = ezp[nn + S1] - ezp[nn];
                    psi_hyx[nn] = b * psi_hyx[nn] + a * d;
                    hy[nn] += c * psi_hyx[nn];
                }
            }
            for (int j = 0; j < sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k <= sz; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = eyp[nn + S1] - eyp[nn];
                    psi_hzx[nn] = b * psi_hzx[nn] + a * d;
                    hz[nn] -= c * psi_hzx[nn];
                }
            }
        }
    }

    for (const Range& r : h_slabs[1])
    {
        // y-graded corrections act on Hx (MINUS d/dy Ez) and Hz (PLUS d/dy Ex)
#pragma omp parallel for schedule(static)
        for (int i = 0; i <= sx; ++i)
        {
            for (int j = r.lo; j < r.hi; ++j)
            {
                const double b = bh[1][j];
                const double a = ah[1][j];
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k < sz; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = ezp[nn + S2] - ezp[nn];
                    psi_hxy[nn] = b * psi_hxy[nn] + a * d;
                    hx[nn] -= c * psi_hxy[nn];
                }
            }
        }
#pragma omp parallel for schedule(static)
        for (int i = 0; i < sx; ++i)
        {
            for (int j = r.lo; j < r.hi; ++j)
            {
                const double b = bh[1][j];
                const double a = ah[1][j];
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = 0; k <= sz; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = exp_[nn + S2] - exp_[nn];
                    psi_hzy[nn] = b * psi_hzy[nn] + a * d;
                    hz[nn] += c * psi_hzy[nn];
                }
            }
        }
    }

    for (const Range& r : h_slabs[2])
    {
        // z-graded corrections act on Hx (PLUS d/dz Ey) and Hy (MINUS d/dz Ex)
#pragma omp parallel for schedule(static)
        for (int i = 0; i <= sx; ++i)
        {
            for (int j = 0; j < sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = r.lo; k < r.hi; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = eyp[nn + 1] - eyp[nn];
                    psi_hxz[nn] = bh[2][k] * psi_hxz[nn] + ah[2][k] * d;
                    hx[nn] += c * psi_hxz[nn];
                }
            }
        }
#pragma omp parallel for schedule(static)
        for (int i = 0; i < sx; ++i)
        {
            for (int j = 0; j <= sy; ++j)
            {
                const std::size_t base = i * S1 + static_cast<std::size_t>(j) * S2;
                for (int k = r.lo; k < r.hi; ++k)
                {
                    const std::size_t nn = base + k;
                    const double d = exp_[nn + 1] - exp_[nn];
                    psi_hyz[nn] = bh[2][k] * psi_hyz[nn] + ah[2][k] * d;
                    hy[nn] -= c * psi_hyz[nn];
                }
            }
        }
    }
}

void SimState::Impl::inject(double t)
{
    for (const ResolvedDipole& d : dipoles)
    {
        const double g = d.pulse.value(t);
        if (g == 0.0)
        {
            continue;
        }
        std::vector<double>& field = d.axis == 0 ? ex : (d.axis == 1 ? ey : ez);
        const std::vector<double>& c = d.axis == 0 ? cex : (d.axis == 1 ? cey : cez);
        field[d.node] += c[d.node] * dx * g;
    }
    for (const ResolvedPlane& p : planes)
    {
        const double g = p.pulse.value(t);
        if (g == 0.0)
        {
            continue;
        }
        std::vector<double>& field = p.field_axis == 0 ? ex : (p.field_axis == 1 ? ey : ez);
        const std::vector<double>& c = p.field_axis == 0 ? cex : (p.field_axis == 1 ? cey : cez);
        // iterate the two axes transverse to the plane normal over the driven
        // component's own update range
        std::array<int, 3> lo {}, hi {};
        for (int w = 0; w < 3; ++w)
        {
            if (w == p.normal_axis)
            {
                lo[w] = p.plane_index;
                hi[w] = p.plane_index + 1;
            }
            else if (w == p.field_axis)
            {
                lo[w] = 0;
                hi[w] = w == 0 ? sx : (w == 1 ? sy : sz);
            }
            else
            {
                lo[w] = t_lo[w];
                hi[w] = t_hi[w];
            }
        }
        for (int i = lo[0]; i < hi[0]; ++i)
        {
            for (int j = lo[1]; j < hi[1]; ++j)
            {
                for (int k = lo[2]; k < hi[2]; ++k)
                {
                    const std::size_t nn = idx(i, j, k);
                    field[nn] += c[nn] * dx * g;
                }
            }
        }
    }
}

void SimState::Impl::accumulate_dft()
{
    const double t = n * dt;
    for (std::size_t m = 0; m < dft_lambda.size(); ++m)
    {
        if ((n - dft_anchor_step) % 1024 == 0)
        {
            const double om = units::omega_from_wavelength(dft_lambda[m]);
            dft_phase[m] = std::polar(1.0, om * t);
        }
        const std::complex<double> ph = dft_phase[m];
        const double pre = ph.real();
        const double pim = ph.imag();
        std::complex<double>* __restrict ax = dft_ex[m].data();
        std::complex<double>* __restrict ay = dft_ey[m].data();
        std::complex<double>* __restrict az = dft_ez[m].data();
        const double* __restrict px = ex.data();
        const double* __restrict py = ey.data();
        const double* __restrict pz = ez.data();
#pragma omp parallel for schedule(static)
        for (long q = 0; q < static_cast<long>(nodes); ++q)
        {
            ax[q] += std::complex<double>(px[q] * pre, px[q] * pim);
            ay[q] += std::complex<double>(py[q] * pre, py[q] * pim);
            az[q] += std::complex<double>(pz[q] * pre, pz[q] * pim);
        }
        dft_phase[m] *= dft_rot[m];
    }
    if (!dft_lambda.empty())
    {
        dft_duration += dt;
    }
}

void SimState::Impl::record()
{
    const double t = n * dt;
    for (std::size_t p = 0; p < probe_nodes.size(); ++p)
    {
        const ResolvedProbe& r = probe_nodes[p];
        const std::vector<double>& field = r.axis == 0 ? ex : (r.axis == 1 ? ey : ez);
        series.samples[p].push_back(field[r.node]);
    }
    if (t <= all_off_time && !series.samples.empty())
    {
        series.ringdown_start = static_cast<int>(series.samples[0].size());
    }
}

void SimState::step()
{
    Impl& s = *impl_;
    const double t_mid = (s.n + 0.5) * s.dt;
    s.update_e();
    if (s.npml > 0)
    {
        s.apply_pml_e();
    }
    s.inject(t_mid);
    s.update_h();
    if (s.npml > 0)
    {
        s.apply_pml_h();
    }
    ++s.n;
    s.record();
    if (!s.dft_lambda.empty())
    {
        s.accumulate_dft();
    }
}

int SimState::step_index() const
{
    return static_cast<int>(impl_->n);
}

double SimState::dt() const
{
    return impl_->dt;
}

double SimState::time() const
{
    return impl_->n * impl_->dt;
}

double SimState::source_off_time() const
{
    return impl_->all_off_time;
}

bool SimState::sources_active() const
{
    return time() <= impl_->all_off_time;
}

const ProbeSeries& SimState::probes() const
{
    return impl_->series;
}

double SimState::total_energy() const
{
    const Impl& s = *impl_;
    const std::size_t S1 = s.s1;
    const std::size_t S2 = s.s2;
    const double* exp_ = s.ex.data();
    const double* eyp = s.ey.data();
    const double* ezp = s.ez.data();
    const double cdt = s.dt / s.dx;

    auto plane_weight = [](int i, int n) { return (i == 0 || i == n) ? 0.5 : 1.0; };

    double we = 0.0;
    for (int i = 0; i < s.sx; ++i)
    {
        for (int j = 0; j <= s.sy; ++j)
        {
            const double wj = plane_weight(j, s.sy);
            for (int k = 0; k <= s.sz; ++k)
            {
                const std::size_t nn = s.idx(i, j, k);
                const double eps = cdt / s.cex[nn];
                we += wj * plane_weight(k, s.sz) * eps * exp_[nn] * exp_[nn];
            }
        }
    }
    for (int i = 0; i <= s.sx; ++i)
    {
        const double wi = plane_weight(i, s.sx);
        for (int j = 0; j < s.sy; ++j)
        {
            for (int k = 0; k <= s.sz; ++k)
            {
                const std::size_t nn = s.idx(i, j, k);
                const double eps = cdt / s.cey[nn];
                we += wi * plane_weight(k, s.sz) * eps * eyp[nn] * eyp[nn];
            }
        }
    }
    for (int i = 0; i <= s.sx; ++i)
    {
        const double wi = plane_weight(i, s.sx);
        for (int j = 0; j <= s.sy; ++j)
        {
            const double wj = plane_weight(j, s.sy);
            for (int k = 0; k < s.sz; ++k)
            {
                const std::size_t nn = s.idx(i, j, k);
                const double eps = cdt / s.cez[nn];
                we += wi * wj * eps * ezp[nn] * ezp[nn];
            }
        }
    }

    // the magnetic part pairs the stored half-step field with the previous
    // half-step value reconstructed from the current electric field, which is
    // the combination the leapfrog update conserves exactly
    double wh = 0.0;
    for (int i = 0; i <= s.sx; ++i)
    {
        const double wi = plane_weight(i, s.sx);
        for (int j = 0; j < s.sy; ++j)
        {
            for (int k = 0; k < s.sz; ++k)
            {
                const std::size_t nn = s.idx(i, j, k);
                const double cur = s.hx[nn];
                const double inc = s.ch
                                   * ((eyp[nn + 1] - eyp[nn]) - (ezp[nn + S2] - ezp[nn]));
                wh += wi * cur * (cur - inc);
            }
        }
    }
    for (int i = 0; i < s.sx; ++i)
    {
        for (int j = 0; j <= s.sy; ++j)
        {
            const double wj = plane_weight(j, s.sy);
            for (int k = 0; k < s.sz; ++k)
            {
                const std::size_t nn = s.idx(i, j, k);
                const double cur = s.hy[nn];
                const double inc = s.ch
                                   * ((ezp[nn + S1] - ezp[nn]) - (exp_[nn + 1] - exp_[nn]));
                wh += wj * cur * (cur - inc);
            }
        }
    }
    for (int i = 0; i < s.sx; ++i)
    {
        for (int j = 0; j < s.sy; ++j)
        {
            for (int k = 0; k <= s.sz; ++k)
            {
                const std::size_t nn = s.idx(i, j, k);
                const double cur = s.hz[nn];
                const double inc = s.ch
                                   * ((exp_[nn + S2] - exp_[nn]) - (eyp[nn + S1] - eyp[nn]));
                wh += plane_weight(k, s.sz) * cur * (cur - inc);
            }
        }
    }

    double mirror_factor = 1.0;
    for (int w = 0; w < 3; ++w)
    {
        if (s.sym[w] != Mirror::none)
        {
            mirror_factor *= 2.0;
        }
    }
    const double cell_volume = s.dx * s.dx * s.dx;
    return 0.5 * (we + wh) * cell_volume * mirror_factor;
}

void SimState::enable_dft(const std::vector<double>& wavelengths)
{
    Impl& s = *impl_;
    require(!wavelengths.empty(), "dft wavelength list is empty");
    require(s.dft_lambda.empty(), "dft accumulation is already enabled");
    for (double l : wavelengths)
    {
        require(l > 0.0, "dft wavelengths must be positive");
    }
    s.dft_lambda = wavelengths;
    s.dft_ex.assign(wavelengths.size(), std::vector<std::complex<double>>(s.nodes));
    s.dft_ey.assign(wavelengths.size(), std::vector<std::complex<double>>(s.nodes));
    s.dft_ez.assign(wavelengths.size(), std::vector<std::complex<double>>(s.nodes));
    s.dft_phase.resize(wavelengths.size());
    s.dft_rot.resize(wavelengths.size());
    s.dft_anchor_step = s.n;
    for (std::size_t m = 0; m < wavelengths.size(); ++m)
    {
        const double om = units::omega_from_wavelength(wavelengths[m]);
        s.dft_rot[m] = std::polar(1.0, om * s.dt);
        s.dft_phase[m] = std::polar(1.0, om * (s.n + 1) * s.dt);
    }
}

ModeField SimState::mode_field(std::size_t which) const
{
    const Impl& s = *impl_;
    if (which >= s.dft_lambda.size())
    {
        throw std::out_of_range("mode_field index exceeds the dft wavelength list");
    }
    ModeField f;
    f.wavelength = s.dft_lambda[which];
    f.dx = s.dx;
    f.nx = s.sx;
    f.ny = s.sy;
    f.nz = s.sz;
    f.symmetry = s.sym;
    f.dt = s.dt;
    f.steps = std::lround(s.dft_duration / s.dt);
    f.start_time = (s.dft_anchor_step + 1) * s.dt;
    const std::size_t cells = static_cast<std::size_t>(s.sx) * s.sy * s.sz;
    f.ex.resize(cells);
    f.ey.resize(cells);
    f.ez.resize(cells);
    const double norm = s.dft_duration > 0.0 ? 1.0 / s.dft_duration : 1.0;
    const auto& ax = s.dft_ex[which];
    const auto& ay = s.dft_ey[which];
    const auto& az = s.dft_ez[which];
    for (int i = 0; i < s.sx; ++i)
    {
        for (int j = 0; j < s.sy; ++j)
        {
            for (int k = 0; k < s.sz; ++k)
            {
                const std::size_t nn = s.idx(i, j, k);
                const std::size_t cc = f.index(i, j, k);
                f.ex[cc] = 0.25 * norm
                           * (ax[nn] + ax[nn + s.s2] + ax[nn + 1] + ax[nn + s.s2 + 1]);
                f.ey[cc] = 0.25 * norm
                           * (ay[nn] + ay[nn + s.s1] + ay[nn + 1] + ay[nn + s.s1 + 1]);
                f.ez[cc] = 0.25 * norm
                           * (az[nn] + az[nn + s.s1] + az[nn + s.s2] + az[nn + s.s1 + s.s2]);
            }
        }
    }
    return f;
}

FieldSnapshot SimState::snapshot(int axis, bool magnetic) const
{
    const Impl& s = *impl_;
    require(axis >= 0 && axis <= 2, "snapshot axis must be 0, 1 or 2");
    FieldSnapshot snap;
    snap.axis = axis;
    snap.magnetic = magnetic;
    snap.step = static_cast<int>(s.n);
    snap.dt = s.dt;
    snap.dx = s.dx;
    snap.nx = s.sx + 1;
    snap.ny = s.sy + 1;
    snap.nz = s.sz + 1;
    const std::vector<double>* src = nullptr;
    if (magnetic)
    {
        src = axis == 0 ? &s.hx : (axis == 1 ? &s.hy : &s.hz);
    }
    else
    {
        src = axis == 0 ? &s.ex : (axis == 1 ? &s.ey : &s.ez);
    }
    snap.values = *src;
    return snap;
}

std::array<int, 3> SimState::stored_cells() const
{
    return { impl_->sx, impl_->sy, impl_->sz };
}

std::array<Mirror, 3> SimState::symmetry() const
{
    return impl_->sym;
}

RunResult run_to_spectrum(const EpsilonGrid& grid, const SimConfig& config,
                          const RunOptions& options)
{
    require(!config.sources.empty() || !config.plane_sources.empty(),
            "run_to_spectrum needs at least one source");
    require(options.ringdown_periods > 0.0, "ringdown_periods must be positive");

    SimState sim(grid, config);

    double longest = 0.0;
    for (const DipoleSource& s : config.sources)
    {
        longest = std::max(longest, s.pulse.wavelength);
    }
    for (const PlaneSource& s : config.plane_sources)
    {
        longest = std::max(longest, s.pulse.wavelength);
    }

    auto guard = [&sim]()
    {
        const ProbeSeries& series = sim.probes();
        for (const auto& channel : series.samples)
        {
            if (!channel.empty() && !std::isfinite(channel.back()))
            {
                throw std::runtime_error("simulation diverged at step "
                                         + std::to_string(sim.step_index()));
            }
        }
    };

    while (sim.sources_active())
    {
        sim.step();
        if (sim.step_index() % 256 == 0)
        {
            guard();
        }
    }

    if (!options.dft_wavelengths.empty())
    {
        sim.enable_dft(options.dft_wavelengths);
    }

    const long ring_steps = std::lround(std::ceil(options.ringdown_periods * longest / sim.dt()));
    for (long i = 0; i < ring_steps; ++i)
    {
        sim.step();
        if (options.on_step)
        {
            options.on_step(sim);
        }
        if (sim.step_index() % 256 == 0)
        {
            guard();
        }
    }
    guard();

    RunResult result;
    result.probes = sim.probes();
    result.steps = sim.step_index();
    for (std::size_t m = 0; m < options.dft_wavelengths.size(); ++m)
    {
        result.fields.push_back(sim.mode_field(m));
    }
    return result;
}

} // namespace phc
