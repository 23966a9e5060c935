#include "phc/geometry.hpp"

#include "phc/rng.hpp"
#include "phc/units.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <sstream>
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

// true when (x, y) falls inside the hole cross-section at relative height z_rel
inline bool inside_hole(const HoleCone& hole, double x, double y, double z_rel)
{
    const double r = hole.radius_at(z_rel);
    if (r <= 0.0)
    {
        return false;
    }
    const double ddx = x - hole.x;
    const double ddy = y - hole.y;
    return ddx * ddx + ddy * ddy < r * r;
}

} // namespace

void MaterialParams::validate() const
{
    require(refractive_index >= 1.0, "material.refractive_index must be >= 1");
}

void M7Params::validate() const
{
    require(lattice_constant > 0.0, "m7.lattice_constant must be positive");
    require(hole_radius > 0.0, "m7.hole_radius must be positive");
    require(hole_radius < 0.5 * lattice_constant,
            "m7.hole_radius must be below half the lattice constant");
    require(thickness > 0.0, "m7.thickness must be positive");
    require(rings >= 4, "m7.rings must be at least 4");
    require(tilt_deg >= 0.0 && tilt_deg < 45.0, "m7.tilt_deg must lie in [0, 45)");
}

void NanobeamParams::validate() const
{
    require(pitch > 0.0, "nanobeam.pitch must be positive");
    require(width > 0.0, "nanobeam.width must be positive");
    require(height > 0.0, "nanobeam.height must be positive");
    require(radius_center > 0.0, "nanobeam.radius_center must be positive");
    require(radius_edge > 0.0, "nanobeam.radius_edge must be positive");
    require(radius_center < 0.5 * width && radius_center < 0.5 * pitch,
            "nanobeam.radius_center must fit inside one lattice cell");
    require(radius_edge < 0.5 * width && radius_edge < 0.5 * pitch,
            "nanobeam.radius_edge must fit inside one lattice cell");
    require(segments_per_side >= 1, "nanobeam.segments_per_side must be at least 1");
    require(tilt_deg >= 0.0 && tilt_deg < 45.0, "nanobeam.tilt_deg must lie in [0, 45)");
}

bool PixelPrismMap::material_at(double x, double y) const
{
    const double half_x = 0.5 * nx * pixel_pitch;
    const double half_y = 0.5 * ny * pixel_pitch;
    int ix = static_cast<int>(std::floor((x + half_x) / pixel_pitch));
    int iy = static_cast<int>(std::floor((y + half_y) / pixel_pitch));
    ix = std::clamp(ix, 0, nx - 1);
    iy = std::clamp(iy, 0, ny - 1);
    return dielectric[static_cast<std::size_t>(iy) * nx + ix] != 0;
}

bool DielectricStructure::contains_material(double x, double y, double z) const
{
    if (std::abs(z) > 0.5 * slab.size_z)
    {
        return false;
    }
    if (std::abs(x) > 0.5 * slab.size_x || std::abs(y) > 0.5 * slab.size_y)
    {
        return false;
    }
    if (mask)
    {
        return mask->material_at(x, y);
    }
    const double z_rel = (z + 0.5 * slab.size_z) / slab.size_z;
    for (const HoleCone& hole : holes)
    {
        if (inside_hole(hole, x, y, z_rel))
        {
            return false;
        }
    }
    return true;
}

BoundingBox DielectricStructure::bounding_box() const
{
    return BoundingBox { { 0.5 * slab.size_x, 0.5 * slab.size_y, 0.5 * slab.size_z } };
}

double UnitCell::area() const
{
    switch (kind)
    {
    case Kind::triangular:
        return 0.5 * std::sqrt(3.0) * pitch * pitch;
    case Kind::rectangular:
        return pitch * width;
    }
    throw std::logic_error("unit cell kind out of range");
}

double filling_factor(double radius, const UnitCell& cell)
{
    require(radius >= 0.0, "filling_factor radius must be non-negative");
    require(cell.pitch > 0.0, "unit cell pitch must be positive");
    if (cell.kind == UnitCell::Kind::rectangular)
    {
        require(cell.width > 0.0, "unit cell width must be positive");
    }
    return units::pi * radius * radius / cell.area();
}

DielectricStructure build_m7(const M7Params& params, const MaterialParams& material)
{
    params.validate();
    material.validate();

    const double a = params.lattice_constant;
    const double row_dy = 0.5 * std::sqrt(3.0) * a;
    const int rings = params.rings;

    // holes reach (3 + rings) cells from the centre along the defect row and
    // rings rows above and below it; the surrounding unpatterned apron keeps
    // the membrane continuous out to the simulation boundary
    const double reach = (3 + rings + 0.26) * a;
    const double apron = 2.5 * a;

    DielectricStructure structure;
    structure.material = material;
    structure.slab.size_x = 2.0 * ((3 + rings) * a + apron);
    structure.slab.size_y = 2.0 * (rings * row_dy + apron);
    structure.slab.size_z = params.thickness;

    for (int m = -rings; m <= rings; ++m)
    {
        const double y = m * row_dy;
        const bool offset_row = (m % 2) != 0;
        const int n_max = static_cast<int>(std::floor(reach / a));
        for (int n = -n_max - 1; n <= n_max; ++n)
        {
            const double column = offset_row ? (n + 0.5) : static_cast<double>(n);
            const double x = column * a;
            if (std::abs(x) > reach)
            {
                continue;
            }
            if (m == 0 && std::abs(n) <= 3)
            {
                continue;  // the seven omitted sites forming the cavity
            }
            structure.holes.push_back(HoleCone { x, y, params.hole_radius, params.hole_radius });
        }
    }

    return apply_tilt(std::move(structure), params.tilt_deg);
}

DielectricStructure build_nanobeam(const NanobeamParams& params, const MaterialParams& material)
{
    params.validate();
    material.validate();

    const double a = params.pitch;
    const double cell_area = a * params.width;
    const double ff_center = units::pi * params.radius_center * params.radius_center / cell_area;
    const double ff_edge = units::pi * params.radius_edge * params.radius_edge / cell_area;
    const int segments = params.segments_per_side;

    DielectricStructure structure;
    structure.material = material;
    structure.slab.size_x = 2.0 * (segments * a + 3.0 * a);
    structure.slab.size_y = params.width;
    structure.slab.size_z = params.height;

    for (int i = 0; i < segments; ++i)
    {
        const double t = segments > 1 ? static_cast<double>(i) / (segments - 1) : 0.0;
        const double ff = ff_center + (ff_edge - ff_center) * t;
        const double radius = std::sqrt(ff * cell_area / units::pi);
        const double x = (i + 0.5) * a;
        structure.holes.push_back(HoleCone { x, 0.0, radius, radius });
        structure.holes.push_back(HoleCone { -x, 0.0, radius, radius });
    }

    return apply_tilt(std::move(structure), params.tilt_deg);
}

DielectricStructure apply_tilt(DielectricStructure structure, double tilt_deg)
{
    require(tilt_deg >= 0.0 && tilt_deg < 45.0, "tilt_deg must lie in [0, 45)");
    if (structure.mask)
    {
        require(tilt_deg == 0.0, "pixel-mask structures cannot be tilted");
        return structure;
    }
    const double shrink = structure.slab.size_z * std::tan(tilt_deg * units::pi / 180.0);
    for (HoleCone& hole : structure.holes)
    {
        hole.radius_bottom = std::max(0.0, hole.radius_top - shrink);
    }
    return structure;
}

DielectricStructure perturb(const DielectricStructure& structure, const PerturbParams& params,
                            PerturbStats* stats)
{
    require(params.position_jitter >= 0.0, "perturb.position_jitter must be non-negative");
    require(params.radius_jitter >= 0.0, "perturb.radius_jitter must be non-negative");
    require(!structure.mask.has_value(), "pixel-mask structures cannot be perturbed");

    // per-component spreads chosen so that the requested values are the mean
    // radial displacement and the mean absolute radius change
    const double sigma_xy = params.position_jitter * std::sqrt(2.0 / units::pi);
    const double sigma_r = params.radius_jitter * std::sqrt(units::pi / 2.0);

    DielectricStructure out = structure;
    int clamped = 0;
    for (std::size_t i = 0; i < out.holes.size(); ++i)
    {
        Rng rng(mix_seed(params.seed, i));
        HoleCone& hole = out.holes[i];
        hole.x += sigma_xy * rng.normal();
        hole.y += sigma_xy * rng.normal();
        const double dr = sigma_r * rng.normal();
        double top = hole.radius_top + dr;
        double bottom = hole.radius_bottom + dr;
        if (top < 1.0)
        {
            ++clamped;
            top = 1.0;
        }
        hole.radius_top = top;
        hole.radius_bottom = std::clamp(bottom, 0.0, top);
    }
    if (stats != nullptr)
    {
        stats->clamped_radii = clamped;
    }
    return out;
}

DielectricStructure import_mask(const GrayImage& image, const MaskImportOptions& options,
                                const MaterialParams& material)
{
    require(image.nx > 0 && image.ny > 0, "mask image must be non-empty");
    require(image.pixels.size() == static_cast<std::size_t>(image.nx) * image.ny,
            "mask image pixel count does not match its dimensions");
    require(options.pixel_pitch > 0.0, "mask.pixel_pitch must be positive");
    require(options.threshold > 0.0 && options.threshold < 1.0,
            "mask.threshold must lie strictly between 0 and 1");
    require(options.thickness > 0.0, "mask.thickness must be positive");
    material.validate();

    PixelPrismMap map;
    map.nx = image.nx;
    map.ny = image.ny;
    map.pixel_pitch = options.pixel_pitch;
    map.dielectric.resize(static_cast<std::size_t>(image.nx) * image.ny);

    std::size_t material_count = 0;
    for (std::size_t i = 0; i < map.dielectric.size(); ++i)
    {
        const bool solid = image.pixels[i] >= options.threshold;
        map.dielectric[i] = solid ? 1 : 0;
        material_count += solid ? 1 : 0;
    }
    if (material_count == 0 || material_count == map.dielectric.size())
    {
        std::cerr << "warning: imported mask is entirely "
                  << (material_count == 0 ? "air" : "material") << "\n";
    }

    DielectricStructure structure;
    structure.material = material;
    structure.slab.size_x = image.nx * options.pixel_pitch;
    structure.slab.size_y = image.ny * options.pixel_pitch;
    structure.slab.size_z = options.thickness;
    structure.mask = std::move(map);
    return structure;
}

GrayImage render_top_view(const DielectricStructure& structure, double pixel_pitch)
{
    require(pixel_pitch > 0.0, "render pixel pitch must be positive");

    GrayImage image;
    image.nx = static_cast<int>(std::lround(structure.slab.size_x / pixel_pitch));
    image.ny = static_cast<int>(std::lround(structure.slab.size_y / pixel_pitch));
    require(image.nx > 0 && image.ny > 0, "render pixel pitch exceeds the slab footprint");
    image.pixels.resize(static_cast<std::size_t>(image.nx) * image.ny);

    const double z_top = 0.5 * structure.slab.size_z * (1.0 - 1e-9);
    const double sub[3] = { -pixel_pitch / 3.0, 0.0, pixel_pitch / 3.0 };
    for (int iy = 0; iy < image.ny; ++iy)
    {
        const double y0 = (iy + 0.5) * pixel_pitch - 0.5 * image.ny * pixel_pitch;
        for (int ix = 0; ix < image.nx; ++ix)
        {
            const double x0 = (ix + 0.5) * pixel_pitch - 0.5 * image.nx * pixel_pitch;
            int hits = 0;
            for (double dy : sub)
            {
                for (double dx : sub)
                {
                    hits += structure.contains_material(x0 + dx, y0 + dy, z_top) ? 1 : 0;
                }
            }
            image.pixels[static_cast<std::size_t>(iy) * image.nx + ix] = hits / 9.0;
        }
    }
    return image;
}

namespace
{

void put_number(std::ostream& os, double value)
{
    char buf[64];
    const auto result = std::to_chars(buf, buf + sizeof buf, value);
    os.write(buf, result.ptr - buf);
}

double take_number(std::istream& is, const char* what)
{
    std::string token;
    if (!(is >> token))
    {
        throw std::runtime_error(std::string("structure text ended while reading ") + what);
    }
    double value = 0.0;
    const auto result = std::from_chars(token.data(), token.data() + token.size(), value);
    if (result.ec != std::errc() || result.ptr != token.data() + token.size())
    {
        throw std::runtime_error(std::string("malformed number '") + token + "' for " + what);
    }
    return value;
}

} // namespace

std::string serialize_structure(const DielectricStructure& structure)
{
    std::ostringstream os;
    os << "structure v1\n";
    os << "refractive_index ";
    put_number(os, structure.material.refractive_index);
    os << "\nslab ";
    put_number(os, structure.slab.size_x);
    os << ' ';
    put_number(os, structure.slab.size_y);
    os << ' ';
    put_number(os, structure.slab.size_z);
    os << "\nholes " << structure.holes.size() << '\n';
    for (const HoleCone& hole : structure.holes)
    {
        put_number(os, hole.x);
        os << ' ';
        put_number(os, hole.y);
        os << ' ';
        put_number(os, hole.radius_top);
        os << ' ';
        put_number(os, hole.radius_bottom);
        os << '\n';
    }
    if (structure.mask)
    {
        const PixelPrismMap& map = *structure.mask;
        os << "mask " << map.nx << ' ' << map.ny << ' ';
        put_number(os, map.pixel_pitch);
        os << '\n';
        for (int iy = 0; iy < map.ny; ++iy)
        {
            for (int ix = 0; ix < map.nx; ++ix)
            {
                os << (map.dielectric[static_cast<std::size_t>(iy) * map.nx + ix] ? '1' : '0');
            }
            os << '\n';
        }
    }
    return std::move(os).str();
}

DielectricStructure parse_structure(const std::string& text)
{
    std::istringstream is(text);
    std::string word;
    if (!(is >> word) || word != "structure")
    {
        throw std::runtime_error("structure text must begin with 'structure v1'");
    }
    if (!(is >> word) || word != "v1")
    {
        throw std::runtime_error("unsupported structure text version '" + word + "'");
    }

    DielectricStructure structure;
    if (!(is >> word) || word != "refractive_index")
    {
        throw std::runtime_error("expected 'refractive_index' in structure text");
    }
    structure.material.refractive_index = take_number(is, "refractive_index");
    if (!(is >> word) || word != "slab")
    {
        throw std::runtime_error("expected 'slab' in structure text");
    }
    structure.slab.size_x = take_number(is, "slab.size_x");
    structure.slab.size_y = take_number(is, "slab.size_y");
    structure.slab.size_z = take_number(is, "slab.size_z");
    if (!(is >> word) || word != "holes")
    {
        throw std::runtime_error("expected 'holes' in structure text");
    }
    const auto hole_count = static_cast<std::size_t>(take_number(is, "hole count"));
    structure.holes.reserve(hole_count);
    for (std::size_t i = 0; i < hole_count; ++i)
    {
        HoleCone hole;
        hole.x = take_number(is, "hole.x");
        hole.y = take_number(is, "hole.y");
        hole.radius_top = take_number(is, "hole.radius_top");
        hole.radius_bottom = take_number(is, "hole.radius_bottom");
        structure.holes.push_back(hole);
    }
    if (is >> word)
    {
        if (word != "mask")
        {
            throw std::runtime_error("unexpected token '" + word + "' in structure text");
        }
        PixelPrismMap map;
        map.nx = static_cast<int>(take_number(is, "mask.nx"));
        map.ny = static_cast<int>(take_number(is, "mask.ny"));
        map.pixel_pitch = take_number(is, "mask.pixel_pitch");
        if (map.nx <= 0 || map.ny <= 0)
        {
            throw std::runtime_error("mask dimensions must be positive");
        }
        map.dielectric.reserve(static_cast<std::size_t>(map.nx) * map.ny);
        for (int iy = 0; iy < map.ny; ++iy)
        {
            std::string row;
            if (!(is >> row) || row.size() != static_cast<std::size_t>(map.nx))
            {
                throw std::runtime_error("mask row " + std::to_string(iy) + " is malformed");
            }
            for (char c : row)
            {
                if (c != '0' && c != '1')
                {
                    throw std::runtime_error("mask rows may contain only 0 and 1");
                }
                map.dielectric.push_back(c == '1' ? 1 : 0);
            }
        }
        structure.mask = std::move(map);
    }
    return structure;
}

} // namespace phc
