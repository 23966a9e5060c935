#include "phc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace phc
{

namespace
{

// uniform 2D bin index over hole centres so each sample point only tests the
// holes that can actually reach it
class HoleIndex
{
public:
    HoleIndex(const std::vector<HoleCone>& holes, double half_x, double half_y, double pad)
    {
        double max_radius = 0.0;
        for (const HoleCone& hole : holes)
        {
            max_radius = std::max({ max_radius, hole.radius_top, hole.radius_bottom });
        }
        bin_size_ = std::max(4.0 * pad, 2.0 * max_radius);
        if (bin_size_ <= 0.0)
        {
            bin_size_ = 1.0;
        }
        origin_x_ = -half_x;
        origin_y_ = -half_y;
        nx_ = std::max(1, static_cast<int>(std::ceil(2.0 * half_x / bin_size_)));
        ny_ = std::max(1, static_cast<int>(std::ceil(2.0 * half_y / bin_size_)));
        bins_.resize(static_cast<std::size_t>(nx_) * ny_);

        for (std::size_t h = 0; h < holes.size(); ++h)
        {
            const HoleCone& hole = holes[h];
            const double reach = std::max(hole.radius_top, hole.radius_bottom) + pad;
            const int ix0 = clamp_x(bin_x(hole.x - reach));
            const int ix1 = clamp_x(bin_x(hole.x + reach));
            const int iy0 = clamp_y(bin_y(hole.y - reach));
            const int iy1 = clamp_y(bin_y(hole.y + reach));
            for (int iy = iy0; iy <= iy1; ++iy)
            {
                for (int ix = ix0; ix <= ix1; ++ix)
                {
                    bins_[static_cast<std::size_t>(iy) * nx_ + ix].push_back(h);
                }
            }
        }
    }

    const std::vector<std::size_t>& candidates(double x, double y) const
    {
        const int ix = clamp_x(bin_x(x));
        const int iy = clamp_y(bin_y(y));
        return bins_[static_cast<std::size_t>(iy) * nx_ + ix];
    }

private:
    int bin_x(double x) const { return static_cast<int>(std::floor((x - origin_x_) / bin_size_)); }
    int bin_y(double y) const { return static_cast<int>(std::floor((y - origin_y_) / bin_size_)); }
    int clamp_x(int ix) const { return std::clamp(ix, 0, nx_ - 1); }
    int clamp_y(int iy) const { return std::clamp(iy, 0, ny_ - 1); }

    double bin_size_ = 1.0;
    double origin_x_ = 0.0;
    double origin_y_ = 0.0;
    int nx_ = 1;
    int ny_ = 1;
    std::vector<std::vector<std::size_t>> bins_;
};

int even_cell_count(double half_extent, double dx)
{
    const int half_cells = static_cast<int>(std::ceil(half_extent / dx - 1e-9));
    return 2 * std::max(1, half_cells);
}

} // namespace

EpsilonGrid rasterize(const DielectricStructure& structure, double dx,
                      const RasterizeOptions& options)
{
    if (dx <= 0.0)
    {
        throw std::invalid_argument("rasterize dx must be positive");
    }
    if (options.subsamples < 1 || options.subsamples > 16)
    {
        throw std::invalid_argument("rasterize subsamples must lie in [1, 16]");
    }
    for (double m : options.margin)
    {
        if (m < 0.0)
        {
            throw std::invalid_argument("rasterize margin must be non-negative");
        }
    }

    const BoundingBox bb = structure.bounding_box();
    EpsilonGrid grid;
    grid.dx = dx;
    grid.nx = even_cell_count(bb.half_extent[0] + options.margin[0], dx);
    grid.ny = even_cell_count(bb.half_extent[1] + options.margin[1], dx);
    grid.nz = even_cell_count(bb.half_extent[2] + options.margin[2], dx);

    // projected per-cell footprint of a time-domain solve on this grid:
    // six field components, split-boundary accumulators and coefficients
    const std::size_t projected = grid.cell_count() * 280;
    if (projected > options.max_bytes)
    {
        throw std::runtime_error(
            "projected solver footprint " + std::to_string(projected) + " bytes exceeds budget "
            + std::to_string(options.max_bytes) + "; coarsen dx or shrink margins");
    }
    grid.eps.assign(grid.cell_count(), 1.0);

    const int sub = options.subsamples;
    std::vector<double> offsets(sub);
    for (int s = 0; s < sub; ++s)
    {
        offsets[s] = ((2 * s + 1) / (2.0 * sub) - 0.5) * dx;
    }
    const int total_samples = sub * sub * sub;
    const double eps_material = structure.material.eps();

    const double half_z = 0.5 * structure.slab.size_z;
    const bool use_holes = !structure.mask && !structure.holes.empty();
    const HoleIndex index(structure.holes, bb.half_extent[0] + dx, bb.half_extent[1] + dx,
                          use_holes ? dx : 0.0);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < grid.nx; ++i)
    {
        const double xc = grid.x_center(i);
        for (int j = 0; j < grid.ny; ++j)
        {
            const double yc = grid.y_center(j);
            const std::vector<std::size_t>* nearby = nullptr;
            if (use_holes)
            {
                nearby = &index.candidates(xc, yc);
            }
            for (int k = 0; k < grid.nz; ++k)
            {
                const double zc = grid.z_center(k);
                if (std::abs(zc) - 0.5 * dx > half_z)
                {
                    continue;  // whole cell above or below the slab, stays air
                }
                int inside = 0;
                for (int sz = 0; sz < sub; ++sz)
                {
                    const double z = zc + offsets[sz];
                    if (std::abs(z) > half_z)
                    {
                        continue;
                    }
                    const double z_rel = (z + half_z) / structure.slab.size_z;
                    for (int sy = 0; sy < sub; ++sy)
                    {
                        const double y = yc + offsets[sy];
                        for (int sx = 0; sx < sub; ++sx)
                        {
                            const double x = xc + offsets[sx];
                            if (std::abs(x) > 0.5 * structure.slab.size_x
                                || std::abs(y) > 0.5 * structure.slab.size_y)
                            {
                                continue;
                            }
                            if (structure.mask)
                            {
                                inside += structure.mask->material_at(x, y) ? 1 : 0;
                                continue;
                            }
                            bool in_hole = false;
                            if (nearby != nullptr)
                            {
                                for (std::size_t h : *nearby)
                                {
                                    const HoleCone& hole = structure.holes[h];
                                    const double r = hole.radius_at(z_rel);
                                    const double ddx = x - hole.x;
                                    const double ddy = y - hole.y;
                                    if (r > 0.0 && ddx * ddx + ddy * ddy < r * r)
                                    {
                                        in_hole = true;
                                        break;
                                    }
                                }
                            }
                            inside += in_hole ? 0 : 1;
                        }
                    }
                }
                if (inside > 0)
                {
                    grid.at(i, j, k) =
                        1.0 + (static_cast<double>(inside) / total_samples) * (eps_material - 1.0);
                }
            }
        }
    }

    return grid;
}

EpsilonGrid rasterize(const DielectricStructure& structure, double dx, double margin)
{
    RasterizeOptions options;
    options.margin = { margin, margin, margin };
    return rasterize(structure, dx, options);
}

} // namespace phc
