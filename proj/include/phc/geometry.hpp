#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace phc
{

struct MaterialParams
{
    double refractive_index = 2.4;

    double eps() const { return refractive_index * refractive_index; }
    void validate() const;
};

// hexagonal-lattice membrane cavity: seven omitted holes in a row
struct M7Params
{
    double lattice_constant = 275.0;  // nm
    double hole_radius = 85.25;       // nm
    double thickness = 302.5;         // nm
    int rings = 8;                    // rows of holes kept on each side of the defect row, >= 4
    double tilt_deg = 0.0;            // sidewall tilt, 0 = vertical

    void validate() const;
};

// suspended beam with a line of holes whose fill factor tapers from the
// centre value to the edge value
struct NanobeamParams
{
    double pitch = 200.0;          // nm
    double width = 300.0;          // nm
    double height = 300.0;         // nm
    double radius_center = 84.0;   // nm, hole pair nearest the centre
    double radius_edge = 74.0;     // nm, outermost hole pair
    int segments_per_side = 10;    // holes on each side of the centre gap
    double tilt_deg = 0.0;

    void validate() const;
};

// truncated-cone air hole through the slab; radius_top is measured at the
// +z surface where the etch enters
struct HoleCone
{
    double x = 0.0;
    double y = 0.0;
    double radius_top = 0.0;
    double radius_bottom = 0.0;

    double radius_at(double z_rel) const  // z_rel in [0,1], 0 = bottom face
    {
        return radius_bottom + (radius_top - radius_bottom) * z_rel;
    }
};

// binarised top-view image used in place of parametric holes; pixel (0,0) is
// the lower-left corner and the map is centred on the origin
struct PixelPrismMap
{
    int nx = 0;
    int ny = 0;
    double pixel_pitch = 0.0;               // nm per pixel
    std::vector<std::uint8_t> dielectric;   // row-major [iy*nx + ix], 1 = material

    bool material_at(double x, double y) const;
};

struct SlabBox
{
    double size_x = 0.0;
    double size_y = 0.0;
    double size_z = 0.0;
};

struct BoundingBox
{
    std::array<double, 3> half_extent { 0.0, 0.0, 0.0 };
};

struct DielectricStructure
{
    SlabBox slab;
    std::vector<HoleCone> holes;
    std::optional<PixelPrismMap> mask;   // overrides holes when present
    MaterialParams material;

    bool contains_material(double x, double y, double z) const;
    BoundingBox bounding_box() const;
};

// unit cell used for fill-factor arithmetic
struct UnitCell
{
    enum class Kind { triangular, rectangular };
    Kind kind = Kind::triangular;
    double pitch = 0.0;   // nm
    double width = 0.0;   // nm, rectangular cells only

    double area() const;
};

struct PerturbParams
{
    double position_jitter = 13.0;  // nm, mean radial displacement
    double radius_jitter = 6.0;     // nm, mean absolute radius deviation
    std::uint64_t seed = 1;
};

struct PerturbStats
{
    int clamped_radii = 0;
};

// grayscale image in [0,1]; row-major, row 0 at the bottom
struct GrayImage
{
    int nx = 0;
    int ny = 0;
    std::vector<double> pixels;

    double at(int ix, int iy) const { return pixels[static_cast<std::size_t>(iy) * nx + ix]; }
};

DielectricStructure build_m7(const M7Params& params, const MaterialParams& material = {});
DielectricStructure build_nanobeam(const NanobeamParams& params, const MaterialParams& material = {});

double filling_factor(double radius, const UnitCell& cell);

// tilts every hole into a truncated cone anchored at the top surface
DielectricStructure apply_tilt(DielectricStructure structure, double tilt_deg);

// applies independent in-plane position and radius disorder to every hole;
// radii that would fall below a 1 nm floor are clamped there and counted
DielectricStructure perturb(const DielectricStructure& structure, const PerturbParams& params,
                            PerturbStats* stats = nullptr);

struct MaskImportOptions
{
    double pixel_pitch = 2.0;   // nm per pixel
    double threshold = 0.5;     // pixels below this are air
    double thickness = 300.0;   // nm, extruded slab height
};

DielectricStructure import_mask(const GrayImage& image, const MaskImportOptions& options,
                                const MaterialParams& material = {});

// renders the structure's top surface into a grayscale image covering the
// slab footprint, antialiased by subpixel sampling
GrayImage render_top_view(const DielectricStructure& structure, double pixel_pitch);

std::string serialize_structure(const DielectricStructure& structure);
DielectricStructure parse_structure(const std::string& text);

} // namespace phc
