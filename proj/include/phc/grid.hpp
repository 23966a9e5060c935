#pragma once

#include "phc/geometry.hpp"

#include <array>
#include <cstddef>
#include <vector>

namespace phc
{

// cell-centred permittivity on a uniform cubic grid centred on the origin;
// all cell counts are kept even so every mirror plane lies exactly on a
// cell boundary
struct EpsilonGrid
{
    double dx = 0.0;
    int nx = 0;
    int ny = 0;
    int nz = 0;
    std::vector<double> eps;

    std::size_t index(int i, int j, int k) const
    {
        return (static_cast<std::size_t>(i) * ny + j) * nz + k;
    }
    double at(int i, int j, int k) const { return eps[index(i, j, k)]; }
    double& at(int i, int j, int k) { return eps[index(i, j, k)]; }

    double x_center(int i) const { return (i - nx / 2 + 0.5) * dx; }
    double y_center(int j) const { return (j - ny / 2 + 0.5) * dx; }
    double z_center(int k) const { return (k - nz / 2 + 0.5) * dx; }

    std::size_t cell_count() const
    {
        return static_cast<std::size_t>(nx) * ny * nz;
    }
};

struct RasterizeOptions
{
    std::array<double, 3> margin { 0.0, 0.0, 0.0 };  // air added beyond the bounding box, nm
    int subsamples = 4;                              // per axis, inside each cell
    std::size_t max_bytes = 6'000'000'000;           // projected solver footprint guard
};

EpsilonGrid rasterize(const DielectricStructure& structure, double dx,
                      const RasterizeOptions& options);

// uniform margin on all axes
EpsilonGrid rasterize(const DielectricStructure& structure, double dx, double margin);

} // namespace phc
