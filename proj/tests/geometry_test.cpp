#include "phc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "testing.hpp"

using namespace phc;
using testing::check;
using testing::check_near;
using testing::check_throws;

namespace
{

constexpr double pi = 3.14159265358979323846;

void test_m7_layout()
{
    M7Params params;
    params.rings = 4;
    const DielectricStructure m7 = build_m7(params);
    const double a = params.lattice_constant;

    check("m7 hole count for four rings", m7.holes.size() == 124,
          "got " + std::to_string(m7.holes.size()));

    int defect_sites = 0;
    int guard_sites = 0;
    for (const HoleCone& hole : m7.holes)
    {
        if (std::abs(hole.y) < 1.0 && std::abs(hole.x) <= 3.0 * a + 1.0)
        {
            ++defect_sites;
        }
        if (std::abs(hole.y) < 1.0 && std::abs(std::abs(hole.x) - 4.0 * a) < 1.0)
        {
            ++guard_sites;
        }
    }
    check("m7 defect row is empty over seven sites", defect_sites == 0);
    check("m7 defect row resumes at the fourth site", guard_sites == 2);

    bool radii_uniform = true;
    for (const HoleCone& hole : m7.holes)
    {
        radii_uniform = radii_uniform && hole.radius_top == params.hole_radius
                        && hole.radius_bottom == params.hole_radius;
    }
    check("m7 untilted holes are straight cylinders", radii_uniform);

    // every hole must have a mirror partner in x and in y
    bool mirrored = true;
    for (const HoleCone& hole : m7.holes)
    {
        const auto has = [&](double x, double y)
        {
            return std::any_of(m7.holes.begin(), m7.holes.end(), [&](const HoleCone& other)
                               { return std::abs(other.x - x) < 1e-9
                                        && std::abs(other.y - y) < 1e-9; });
        };
        mirrored = mirrored && has(-hole.x, hole.y) && has(hole.x, -hole.y);
    }
    check("m7 hole set has both in-plane mirrors", mirrored);

    check_near("m7 slab length", m7.slab.size_x, 2.0 * (7.0 + 2.5) * a, 1e-9);
    check_near("m7 slab width", m7.slab.size_y,
               2.0 * (4.0 * 0.5 * std::sqrt(3.0) * a + 2.5 * a), 1e-9);
    check_near("m7 slab height", m7.slab.size_z, params.thickness, 1e-9);

    M7Params thin = params;
    thin.rings = 3;
    check_throws("m7 rejects fewer than four rings", [&] { build_m7(thin); }, "at least 4");

    M7Params fat = params;
    fat.hole_radius = 140.0;
    check_throws("m7 rejects holes wider than the pitch", [&] { build_m7(fat); },
                 "half the lattice constant");
}

void test_filling_factor()
{
    UnitCell triangular;
    triangular.kind = UnitCell::Kind::triangular;
    triangular.pitch = 275.0;
    check_near("triangular fill factor at nominal radius",
               filling_factor(85.25, triangular), 0.3486, 5e-5);

    UnitCell beam;
    beam.kind = UnitCell::Kind::rectangular;
    beam.pitch = 200.0;
    beam.width = 300.0;
    check_near("beam fill factor at the centre radius", filling_factor(84.0, beam), 0.3695,
               5e-5);
    check_near("beam fill factor at the edge radius", filling_factor(74.0, beam), 0.2867,
               5e-5);

    check_throws("fill factor rejects a negative radius",
                 [&] { filling_factor(-1.0, beam); }, "non-negative");
}

void test_tilt()
{
    M7Params params;
    params.rings = 4;
    params.thickness = 300.0;
    params.tilt_deg = 6.0;
    const DielectricStructure tilted = build_m7(params);

    const double expected_bottom = 85.25 - 300.0 * std::tan(6.0 * pi / 180.0);
    bool cones_ok = true;
    for (const HoleCone& hole : tilted.holes)
    {
        cones_ok = cones_ok && std::abs(hole.radius_top - 85.25) < 1e-12
                   && std::abs(hole.radius_bottom - expected_bottom) < 1e-9;
    }
    check("tilt turns every hole into the same cone", cones_ok);
    check_near("tilted bottom radius", tilted.holes.front().radius_bottom, 53.72, 0.01);

    DielectricStructure narrow;
    narrow.slab = SlabBox { 1000.0, 1000.0, 300.0 };
    narrow.holes.push_back(HoleCone { 0.0, 0.0, 20.0, 20.0 });
    narrow = apply_tilt(std::move(narrow), 6.0);
    check("tilt clamps a vanishing bottom radius at zero",
          narrow.holes.front().radius_bottom == 0.0);

    // the cone loses material only near the bottom face
    check("tilted hole keeps its top cross-section",
          tilted.contains_material(80.0 + 4.0 * 275.0, 0.0, 149.0) == false);
    check("tilted hole closes up near the bottom",
          tilted.contains_material(70.0 + 4.0 * 275.0, 0.0, -149.0) == true);

    GrayImage image;
    image.nx = 4;
    image.ny = 4;
    image.pixels.assign(16, 1.0);
    DielectricStructure masked = import_mask(image, MaskImportOptions {});
    check_throws("tilt rejects pixel-mask structures",
                 [&] { apply_tilt(std::move(masked), 3.0); }, "cannot be tilted");
}

DielectricStructure synthetic_lattice(int nx, int ny, double spacing, double radius)
{
    DielectricStructure structure;
    structure.slab.size_x = (nx + 2) * spacing;
    structure.slab.size_y = (ny + 2) * spacing;
    structure.slab.size_z = 300.0;
    for (int j = 0; j < ny; ++j)
    {
        for (int i = 0; i < nx; ++i)
        {
            const double x = (i - 0.5 * (nx - 1)) * spacing;
            const double y = (j - 0.5 * (ny - 1)) * spacing;
            structure.holes.push_back(HoleCone { x, y, radius, radius });
        }
    }
    return structure;
}

void test_perturb()
{
    const DielectricStructure base = synthetic_lattice(100, 200, 300.0, 85.0);

    PerturbParams params;
    params.position_jitter = 13.0;
    params.radius_jitter = 6.0;
    params.seed = 42;

    PerturbStats stats;
    const DielectricStructure shaken = perturb(base, params, &stats);
    check("perturb keeps the hole count",
          shaken.holes.size() == base.holes.size());

    double mean_shift = 0.0;
    double mean_dr = 0.0;
    for (std::size_t i = 0; i < base.holes.size(); ++i)
    {
        const double dx = shaken.holes[i].x - base.holes[i].x;
        const double dy = shaken.holes[i].y - base.holes[i].y;
        mean_shift += std::hypot(dx, dy);
        mean_dr += std::abs(shaken.holes[i].radius_top - base.holes[i].radius_top);
    }
    mean_shift /= static_cast<double>(base.holes.size());
    mean_dr /= static_cast<double>(base.holes.size());
    check_near("perturb mean radial displacement", mean_shift, 13.0, 0.5);
    check_near("perturb mean absolute radius change", mean_dr, 6.0, 0.3);
    check("perturb leaves nominal radii unclamped", stats.clamped_radii == 0);

    const DielectricStructure again = perturb(base, params);
    bool identical = true;
    for (std::size_t i = 0; i < shaken.holes.size(); ++i)
    {
        identical = identical && shaken.holes[i].x == again.holes[i].x
                    && shaken.holes[i].y == again.holes[i].y
                    && shaken.holes[i].radius_top == again.holes[i].radius_top;
    }
    check("perturb is deterministic for a fixed seed", identical);

    PerturbParams other = params;
    other.seed = 43;
    const DielectricStructure different = perturb(base, other);
    check("perturb depends on the seed",
          different.holes.front().x != shaken.holes.front().x);

    PerturbParams off;
    off.position_jitter = 0.0;
    off.radius_jitter = 0.0;
    const DielectricStructure still = perturb(base, off);
    bool unchanged = true;
    for (std::size_t i = 0; i < base.holes.size(); ++i)
    {
        unchanged = unchanged && still.holes[i].x == base.holes[i].x
                    && still.holes[i].y == base.holes[i].y
                    && still.holes[i].radius_top == base.holes[i].radius_top;
    }
    check("zero jitter is the identity", unchanged);

    DielectricStructure tiny = synthetic_lattice(40, 40, 300.0, 2.0);
    PerturbParams rough;
    rough.position_jitter = 0.0;
    rough.radius_jitter = 5.0;
    PerturbStats tiny_stats;
    const DielectricStructure clamped = perturb(tiny, rough, &tiny_stats);
    double min_radius = 1e30;
    for (const HoleCone& hole : clamped.holes)
    {
        min_radius = std::min(min_radius, hole.radius_top);
    }
    check("small radii are clamped at the floor", min_radius == 1.0,
          "min " + std::to_string(min_radius));
    check("clamp events are counted", tiny_stats.clamped_radii > 0,
          "count " + std::to_string(tiny_stats.clamped_radii));
}

void test_nanobeam()
{
    NanobeamParams params;
    const DielectricStructure beam = build_nanobeam(params);
    check("nanobeam hole count for ten segments", beam.holes.size() == 20,
          "got " + std::to_string(beam.holes.size()));

    std::vector<HoleCone> sorted = beam.holes;
    std::sort(sorted.begin(), sorted.end(),
              [](const HoleCone& lhs, const HoleCone& rhs)
              { return std::abs(lhs.x) < std::abs(rhs.x); });
    check_near("innermost pair radius", sorted.front().radius_top, 84.0, 1e-9);
    check_near("outermost pair radius", sorted.back().radius_top, 74.0, 1e-9);
    check_near("innermost pair position", std::abs(sorted.front().x), 100.0, 1e-9);
    check_near("outermost pair position", std::abs(sorted.back().x), 1900.0, 1e-9);

    bool monotone = true;
    for (std::size_t i = 2; i < sorted.size(); i += 2)
    {
        monotone = monotone && sorted[i].radius_top < sorted[i - 2].radius_top;
    }
    check("taper radii shrink towards the ends", monotone);

    // the taper is linear in fill factor, not in radius
    const double cell = params.pitch * params.width;
    const double ff0 = pi * 84.0 * 84.0 / cell;
    const double ff9 = pi * 74.0 * 74.0 / cell;
    const double ff4 = ff0 + (ff9 - ff0) * (4.0 / 9.0);
    check_near("taper interpolates the fill factor", sorted[8].radius_top,
               std::sqrt(ff4 * cell / pi), 1e-9);

    check_near("nanobeam slab length", beam.slab.size_x, 2.0 * 13.0 * 200.0, 1e-9);
    check_near("nanobeam slab width", beam.slab.size_y, 300.0, 1e-9);

    NanobeamParams single = params;
    single.segments_per_side = 1;
    check("single segment yields one pair",
          build_nanobeam(single).holes.size() == 2);

    NanobeamParams oversize = params;
    oversize.radius_center = 101.0;
    check_throws("nanobeam rejects holes wider than a cell",
                 [&] { build_nanobeam(oversize); }, "fit inside one lattice cell");
}

void test_mask_import()
{
    GrayImage board;
    board.nx = 64;
    board.ny = 48;
    board.pixels.resize(static_cast<std::size_t>(board.nx) * board.ny);
    for (int j = 0; j < board.ny; ++j)
    {
        for (int i = 0; i < board.nx; ++i)
        {
            board.pixels[static_cast<std::size_t>(j) * board.nx + i] =
                ((i + j) % 2 == 0) ? 1.0 : 0.0;
        }
    }
    MaskImportOptions options;
    options.pixel_pitch = 10.0;
    options.thickness = 200.0;
    const DielectricStructure checker = import_mask(board, options);
    check("mask import keeps the pixel footprint",
          checker.mask.has_value() && checker.mask->nx == 64 && checker.mask->ny == 48);

    int solid = 0;
    int total = 0;
    for (int j = 0; j < board.ny; ++j)
    {
        for (int i = 0; i < board.nx; ++i)
        {
            const double x = (i + 0.5) * options.pixel_pitch - 0.5 * checker.slab.size_x;
            const double y = (j + 0.5) * options.pixel_pitch - 0.5 * checker.slab.size_y;
            solid += checker.contains_material(x, y, 0.0) ? 1 : 0;
            ++total;
        }
    }
    const double fill = static_cast<double>(solid) / total;
    check_near("checkerboard mask fills half the slab", fill, 0.5, 1.0 / 48.0);

    GrayImage blank = board;
    blank.pixels.assign(blank.pixels.size(), 1.0);
    const DielectricStructure slab_only = import_mask(blank, options);
    check("all-bright mask is a plain slab",
          slab_only.contains_material(0.0, 0.0, 0.0)
              && slab_only.contains_material(250.0, -150.0, 90.0));

    GrayImage dark = board;
    dark.pixels.assign(dark.pixels.size(), 0.0);
    const DielectricStructure empty = import_mask(dark, options);
    check("all-dark mask contains no material", !empty.contains_material(0.0, 0.0, 0.0));

    check_throws("mask import rejects an empty image",
                 [&] { import_mask(GrayImage {}, options); }, "non-empty");
}

void test_render_round_trip()
{
    const DielectricStructure beam = build_nanobeam(NanobeamParams {});
    const double pitch = 5.0;
    const GrayImage view = render_top_view(beam, pitch);
    check("render covers the slab footprint",
          view.nx == 1040 && view.ny == 60,
          std::to_string(view.nx) + "x" + std::to_string(view.ny));

    MaskImportOptions options;
    options.pixel_pitch = pitch;
    options.thickness = beam.slab.size_z;
    const DielectricStructure imported = import_mask(view, options, beam.material);

    double hole_area = 0.0;
    for (const HoleCone& hole : beam.holes)
    {
        hole_area += pi * hole.radius_top * hole.radius_top;
    }
    const double analytic_air = hole_area / (beam.slab.size_x * beam.slab.size_y);

    int air = 0;
    int total = 0;
    for (int j = 0; j < view.ny; ++j)
    {
        for (int i = 0; i < view.nx; ++i)
        {
            const double x = (i + 0.5) * pitch - 0.5 * imported.slab.size_x;
            const double y = (j + 0.5) * pitch - 0.5 * imported.slab.size_y;
            air += imported.contains_material(x, y, 0.0) ? 0 : 1;
            ++total;
        }
    }
    const double imported_air = static_cast<double>(air) / total;
    check_near("mask round trip preserves the air fraction", imported_air, analytic_air,
               0.01);
}

void test_serialize_round_trip()
{
    M7Params params;
    params.rings = 4;
    params.tilt_deg = 6.0;
    DielectricStructure original = build_m7(params);
    PerturbParams jitter;
    jitter.seed = 5;
    original = perturb(original, jitter);

    const std::string text = serialize_structure(original);
    const DielectricStructure parsed = parse_structure(text);
    check("parse recovers the hole count", parsed.holes.size() == original.holes.size());
    check("parse recovers the slab",
          parsed.slab.size_x == original.slab.size_x
              && parsed.slab.size_y == original.slab.size_y
              && parsed.slab.size_z == original.slab.size_z);
    check("parse recovers the material",
          parsed.material.refractive_index == original.material.refractive_index);

    bool holes_exact = true;
    for (std::size_t i = 0; i < original.holes.size(); ++i)
    {
        holes_exact = holes_exact && parsed.holes[i].x == original.holes[i].x
                      && parsed.holes[i].y == original.holes[i].y
                      && parsed.holes[i].radius_top == original.holes[i].radius_top
                      && parsed.holes[i].radius_bottom == original.holes[i].radius_bottom;
    }
    check("parse recovers every hole bit-exactly", holes_exact);
    check("serialization is a fixed point", serialize_structure(parsed) == text);

    GrayImage tiny;
    tiny.nx = 3;
    tiny.ny = 2;
    tiny.pixels = { 1.0, 0.0, 1.0, 0.0, 1.0, 0.0 };
    const DielectricStructure masked = import_mask(tiny, MaskImportOptions {});
    const std::string mask_text = serialize_structure(masked);
    const DielectricStructure mask_parsed = parse_structure(mask_text);
    check("mask serialization round-trips",
          mask_parsed.mask.has_value()
              && mask_parsed.mask->dielectric == masked.mask->dielectric
              && serialize_structure(mask_parsed) == mask_text);
}

} // namespace

int main()
{
    test_m7_layout();
    test_filling_factor();
    test_tilt();
    test_perturb();
    test_nanobeam();
    test_mask_import();
    test_render_round_trip();
    test_serialize_round_trip();
    return testing::summary("geometry_test");
}
