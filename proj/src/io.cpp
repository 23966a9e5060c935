#include "phc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "phc/units.hpp"

#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <png.h>

namespace phc
{

namespace
{

using ordered_json = nlohmann::ordered_json;

void require(bool ok, const std::string& message)
{
    if (!ok)
    {
        throw std::runtime_error(message);
    }
}

std::string format_number(double value)
{
    char buffer[32];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    require(ec == std::errc(), "number formatting failed");
    return std::string(buffer, ptr);
}

double parse_number(const std::string& text)
{
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    require(ec == std::errc() && ptr == end, "malformed number: '" + text + "'");
    return value;
}

std::ofstream open_out(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
    {
        throw std::runtime_error("cannot write file: " + path);
    }
    return out;
}

std::ifstream open_in(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw std::runtime_error("cannot read file: " + path);
    }
    return in;
}

const char* parity_name(Parity parity)
{
    switch (parity)
    {
        case Parity::even: return "even";
        case Parity::odd: return "odd";
        default: return "indeterminate";
    }
}

Parity parity_from(const std::string& name)
{
    if (name == "even")
    {
        return Parity::even;
    }
    if (name == "odd")
    {
        return Parity::odd;
    }
    require(name == "indeterminate", "unknown parity '" + name + "'");
    return Parity::indeterminate;
}

const char* axis_name(int axis)
{
    switch (axis)
    {
        case 0: return "x";
        case 1: return "y";
        default: return "z";
    }
}

int axis_from(const std::string& name)
{
    if (name == "x")
    {
        return 0;
    }
    if (name == "y")
    {
        return 1;
    }
    require(name == "z", "unknown axis '" + name + "'");
    return 2;
}

const char* mirror_name(Mirror mirror)
{
    switch (mirror)
    {
        case Mirror::even: return "even";
        case Mirror::odd: return "odd";
        default: return "none";
    }
}

Mirror mirror_from(const std::string& name)
{
    if (name == "even")
    {
        return Mirror::even;
    }
    if (name == "odd")
    {
        return Mirror::odd;
    }
    require(name == "none", "unknown mirror '" + name + "'");
    return Mirror::none;
}

void write_doubles(const std::string& path, const double* values, std::size_t count)
{
    std::ofstream out = open_out(path);
    out.write(reinterpret_cast<const char*>(values), static_cast<std::streamsize>(count * 8));
    require(static_cast<bool>(out), "short write: " + path);
}

void read_doubles(const std::string& path, double* values, std::size_t count)
{
    std::ifstream in = open_in(path);
    in.read(reinterpret_cast<char*>(values), static_cast<std::streamsize>(count * 8));
    require(in.gcount() == static_cast<std::streamsize>(count * 8), "short read: " + path);
}

} // namespace

std::string read_text_file(const std::string& path)
{
    std::ifstream in = open_in(path);
    std::ostringstream text;
    text << in.rdbuf();
    return text.str();
}

void write_text_file(const std::string& path, const std::string& content)
{
    std::ofstream out = open_out(path);
    out << content;
    require(static_cast<bool>(out), "short write: " + path);
}

void write_probe_csv(const std::string& path, const ProbeSeries& series, std::size_t probe)
{
    require(probe < series.samples.size(), "probe index out of range");
    const FieldProbe& where = series.probes[probe];
    std::ofstream out = open_out(path);
    out << "# dt_ct " << format_number(series.dt) << '\n';
    out << "# ringdown_start " << series.ringdown_start << '\n';
    out << "# probe_axis " << axis_name(where.axis) << '\n';
    out << "# probe_position " << format_number(where.position[0]) << ' '
        << format_number(where.position[1]) << ' ' << format_number(where.position[2]) << '\n';
    out << "time_fs,value\n";
    const std::vector<double>& samples = series.samples[probe];
    for (std::size_t n = 0; n < samples.size(); ++n)
    {
        out << format_number(series.time_fs(static_cast<int>(n))) << ','
            << format_number(samples[n]) << '\n';
    }
    require(static_cast<bool>(out), "short write: " + path);
}

std::vector<double> LoadedProbe::ringdown() const
{
    const std::size_t start = std::min(samples.size(), static_cast<std::size_t>(ringdown_start));
    return std::vector<double>(samples.begin() + start, samples.end());
}

LoadedProbe read_probe_csv(const std::string& path)
{
    std::ifstream in = open_in(path);
    LoadedProbe loaded;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line))
    {
        if (!line.empty() && line.back() == '\r')
        {
            line.pop_back();
        }
        if (line.empty())
        {
            continue;
        }
        if (line.front() == '#')
        {
            std::istringstream meta(line.substr(1));
            std::string key;
            meta >> key;
            if (key == "dt_ct")
            {
                meta >> loaded.dt;
            }
            else if (key == "ringdown_start")
            {
                meta >> loaded.ringdown_start;
            }
            else if (key == "probe_axis")
            {
                std::string axis;
                meta >> axis;
                loaded.probe.axis = axis_from(axis);
            }
            else if (key == "probe_position")
            {
                meta >> loaded.probe.position[0] >> loaded.probe.position[1] >>
                    loaded.probe.position[2];
            }
            continue;
        }
        if (!header_seen)
        {
            require(line == "time_fs,value", path + ": unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        const std::size_t comma = line.find(',');
        require(comma != std::string::npos, path + ": malformed row '" + line + "'");
        loaded.samples.push_back(parse_number(line.substr(comma + 1)));
    }
    require(loaded.dt > 0.0, path + ": missing dt_ct metadata");
    return loaded;
}

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum)
{
    std::ofstream out = open_out(path);
    out << "wavelength_nm,power_au\n";
    for (std::size_t i = 0; i < spectrum.wavelength.size(); ++i)
    {
        out << format_number(spectrum.wavelength[i]) << ',' << format_number(spectrum.power[i])
            << '\n';
    }
    require(static_cast<bool>(out), "short write: " + path);
}

void write_modes_json(const std::string& path, const std::vector<ResonantMode>& modes)
{
    ordered_json root = ordered_json::array();
    for (const ResonantMode& mode : modes)
    {
        ordered_json entry;
        entry["label"] = mode.label;
        entry["lambda_c_nm"] = mode.wavelength;
        entry["q"] = mode.q;
        entry["amplitude"] = mode.amplitude;
        entry["parity"] = parity_name(mode.parity);
        entry["polarization"] = axis_name(mode.polarization_axis);
        if (mode.volume.has_value())
        {
            entry["v_mod"] = *mode.volume;
        }
        root.push_back(std::move(entry));
    }
    write_text_file(path, root.dump(2) + "\n");
}

std::vector<ResonantMode> read_modes_json(const std::string& path)
{
    const ordered_json root = ordered_json::parse(read_text_file(path));
    require(root.is_array(), path + ": mode table must be a JSON array");
    std::vector<ResonantMode> modes;
    for (const ordered_json& entry : root)
    {
        ResonantMode mode;
        mode.label = entry.at("label").get<std::string>();
        mode.wavelength = entry.at("lambda_c_nm").get<double>();
        mode.q = entry.at("q").get<double>();
        mode.amplitude = entry.value("amplitude", 0.0);
        mode.parity = parity_from(entry.at("parity").get<std::string>());
        mode.polarization_axis = axis_from(entry.at("polarization").get<std::string>());
        if (entry.contains("v_mod"))
        {
            mode.volume = entry.at("v_mod").get<double>();
        }
        modes.push_back(std::move(mode));
    }
    return modes;
}

void write_sensitivity_csv(const std::string& path, const SensitivityReport& report)
{
    std::ofstream out = open_out(path);
    out << "# parameter "
        << (report.parameter == TuneParameter::all_radii ? "all_radii" : "thickness") << '\n';
    out << "# delta_nm " << format_number(report.delta) << '\n';
    out << "label,parity,lambda_base_nm,lambda_perturbed_nm,slope_nm_per_nm,ambiguous\n";
    for (const ModeShift& shift : report.shifts)
    {
        out << shift.label << ',' << parity_name(shift.parity) << ','
            << format_number(shift.lambda_base) << ',';
        if (shift.ambiguous)
        {
            out << ",,1\n";
        }
        else
        {
            out << format_number(shift.lambda_perturbed) << ',' << format_number(shift.slope)
                << ",0\n";
        }
    }
    require(static_cast<bool>(out), "short write: " + path);
}

void write_trace_csv(const std::string& path, const TuningTrace& trace)
{
    std::ofstream out = open_out(path);
    out << "step,mode_label,lambda_nm,q\n";
    for (const TracePoint& point : trace.points)
    {
        out << point.step << ',' << point.label << ',' << format_number(point.wavelength) << ','
            << format_number(point.q) << '\n';
    }
    require(static_cast<bool>(out), "short write: " + path);
}

void write_eps_slice_csv(const std::string& path, const EpsilonGrid& grid)
{
    std::ofstream out = open_out(path);
    out << "# dx_nm " << format_number(grid.dx) << '\n';
    out << "# nx " << grid.nx << '\n';
    out << "# ny " << grid.ny << '\n';
    const int k = grid.nz / 2;
    for (int j = 0; j < grid.ny; ++j)
    {
        for (int i = 0; i < grid.nx; ++i)
        {
            if (i != 0)
            {
                out << ',';
            }
            out << format_number(grid.at(i, j, k));
        }
        out << '\n';
    }
    require(static_cast<bool>(out), "short write: " + path);
}

void write_snapshot(const std::string& base, const FieldSnapshot& snapshot)
{
    ordered_json meta;
    meta["component"] = std::string(snapshot.magnetic ? "h" : "e") + axis_name(snapshot.axis);
    meta["dims"] = { snapshot.nx, snapshot.ny, snapshot.nz };
    meta["dx_nm"] = snapshot.dx;
    meta["step"] = snapshot.step;
    meta["time_fs"] = snapshot.step * snapshot.dt / units::c_nm_per_fs;
    meta["layout"] = "float64 little-endian C-order";
    write_text_file(base + ".json", meta.dump(2) + "\n");
    write_doubles(base + ".f64", snapshot.values.data(), snapshot.values.size());
}

void save_mode_field(const std::string& base, const ModeField& field)
{
    ordered_json meta;
    meta["wavelength_nm"] = field.wavelength;
    meta["dx_nm"] = field.dx;
    meta["dims"] = { field.nx, field.ny, field.nz };
    meta["symmetry"] = { mirror_name(field.symmetry[0]), mirror_name(field.symmetry[1]),
                         mirror_name(field.symmetry[2]) };
    meta["window"] = { { "dt_nm", field.dt },
                       { "steps", field.steps },
                       { "start_nm", field.start_time } };
    meta["layout"] = "ex,ey,ez complex float64 little-endian C-order";
    write_text_file(base + ".json", meta.dump(2) + "\n");

    const std::size_t cells = field.ex.size();
    std::vector<double> packed;
    packed.reserve(cells * 6);
    for (const auto* block : { &field.ex, &field.ey, &field.ez })
    {
        for (const std::complex<double>& value : *block)
        {
            packed.push_back(value.real());
            packed.push_back(value.imag());
        }
    }
    write_doubles(base + ".f64", packed.data(), packed.size());
}

ModeField load_mode_field(const std::string& base)
{
    const ordered_json meta = ordered_json::parse(read_text_file(base + ".json"));
    ModeField field;
    field.wavelength = meta.at("wavelength_nm").get<double>();
    field.dx = meta.at("dx_nm").get<double>();
    field.nx = meta.at("dims").at(0).get<int>();
    field.ny = meta.at("dims").at(1).get<int>();
    field.nz = meta.at("dims").at(2).get<int>();
    for (int axis = 0; axis < 3; ++axis)
    {
        field.symmetry[axis] = mirror_from(meta.at("symmetry").at(axis).get<std::string>());
    }
    if (meta.contains("window"))
    {
        field.dt = meta.at("window").at("dt_nm").get<double>();
        field.steps = meta.at("window").at("steps").get<long>();
        field.start_time = meta.at("window").at("start_nm").get<double>();
    }
    const std::size_t cells = static_cast<std::size_t>(field.nx) * field.ny * field.nz;
    std::vector<double> packed(cells * 6);
    read_doubles(base + ".f64", packed.data(), packed.size());
    field.ex.resize(cells);
    field.ey.resize(cells);
    field.ez.resize(cells);
    for (std::size_t c = 0; c < cells; ++c)
    {
        field.ex[c] = { packed[2 * c], packed[2 * c + 1] };
        field.ey[c] = { packed[2 * cells + 2 * c], packed[2 * cells + 2 * c + 1] };
        field.ez[c] = { packed[4 * cells + 2 * c], packed[4 * cells + 2 * c + 1] };
    }
    return field;
}

GrayImage read_png_gray(const std::string& path)
{
    std::FILE* file = std::fopen(path.c_str(), "rb");
    if (file == nullptr)
    {
        throw std::runtime_error("cannot read file: " + path);
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (info == nullptr)
    {
        if (png != nullptr)
        {
            png_destroy_read_struct(&png, nullptr, nullptr);
        }
        std::fclose(file);
        throw std::runtime_error("libpng init failed");
    }
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(file);
        throw std::runtime_error("malformed PNG: " + path);
    }
    png_init_io(png, file);
    png_read_info(png, info);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);

    if (color == PNG_COLOR_TYPE_PALETTE)
    {
        png_set_palette_to_rgb(png);
    }
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8)
    {
        png_set_expand_gray_1_2_4_to_8(png);
    }
    if ((color & PNG_COLOR_MASK_COLOR) != 0 || color == PNG_COLOR_TYPE_PALETTE)
    {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if ((color & PNG_COLOR_MASK_ALPHA) != 0)
    {
        png_set_strip_alpha(png);
    }
    if (png_get_valid(png, info, PNG_INFO_tRNS) != 0)
    {
        png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);
    }
    png_read_update_info(png, info);

    const int out_depth = png_get_bit_depth(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    std::vector<png_byte> data(row_bytes * height);
    rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y)
    {
        rows[y] = data.data() + row_bytes * y;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(file);

    GrayImage image;
    image.nx = static_cast<int>(width);
    image.ny = static_cast<int>(height);
    image.pixels.resize(static_cast<std::size_t>(width) * height);
    for (png_uint_32 y = 0; y < height; ++y)
    {
        const png_byte* row = data.data() + row_bytes * y;
        // PNG rows run top to bottom; GrayImage row 0 is the bottom
        double* out = image.pixels.data() + static_cast<std::size_t>(height - 1 - y) * width;
        if (out_depth == 16)
        {
            for (png_uint_32 x = 0; x < width; ++x)
            {
                const unsigned value = (static_cast<unsigned>(row[2 * x]) << 8) | row[2 * x + 1];
                out[x] = value / 65535.0;
            }
        }
        else
        {
            for (png_uint_32 x = 0; x < width; ++x)
            {
                out[x] = row[x] / 255.0;
            }
        }
    }
    return image;
}

void write_png_gray(const std::string& path, const GrayImage& image)
{
    require(image.nx > 0 && image.ny > 0, "png image must be non-empty");
    require(image.pixels.size() == static_cast<std::size_t>(image.nx) * image.ny,
            "png pixel count does not match its dimensions");
    std::FILE* file = std::fopen(path.c_str(), "wb");
    if (file == nullptr)
    {
        throw std::runtime_error("cannot write file: " + path);
    }
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (info == nullptr)
    {
        if (png != nullptr)
        {
            png_destroy_write_struct(&png, nullptr);
        }
        std::fclose(file);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png)))
    {
        png_destroy_write_struct(&png, &info);
        std::fclose(file);
        throw std::runtime_error("png write failed: " + path);
    }
    png_init_io(png, file);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.nx),
                 static_cast<png_uint_32>(image.ny), 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<png_byte> row(static_cast<std::size_t>(image.nx));
    for (int y = 0; y < image.ny; ++y)
    {
        // GrayImage row 0 is the bottom; PNG writes top to bottom
        const double* src = image.pixels.data() + static_cast<std::size_t>(image.ny - 1 - y) * image.nx;
        for (int x = 0; x < image.nx; ++x)
        {
            const double value = std::clamp(src[x], 0.0, 1.0);
            row[x] = static_cast<png_byte>(std::lround(value * 255.0));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, info);
    png_destroy_write_struct(&png, &info);
    std::fclose(file);
}

std::string sha256_file_hex(const std::string& path)
{
    std::ifstream in = open_in(path);
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    require(ctx != nullptr, "digest context allocation failed");
    if (EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
    {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("digest init failed");
    }
    std::vector<char> buffer(1 << 16);
    while (in)
    {
        in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
        const std::streamsize got = in.gcount();
        if (got > 0 && EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(got)) != 1)
        {
            EVP_MD_CTX_free(ctx);
            throw std::runtime_error("digest update failed");
        }
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_DigestFinal_ex(ctx, digest, &length) != 1)
    {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("digest final failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i)
    {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

void write_manifest(const std::string& directory)
{
    namespace fs = std::filesystem;
    std::vector<std::string> paths;
    for (const fs::directory_entry& entry : fs::recursive_directory_iterator(directory))
    {
        if (!entry.is_regular_file())
        {
            continue;
        }
        const std::string relative =
            fs::relative(entry.path(), directory).generic_string();
        if (relative == "manifest.json")
        {
            continue;
        }
        paths.push_back(relative);
    }
    std::sort(paths.begin(), paths.end());

    ordered_json root = ordered_json::array();
    for (const std::string& relative : paths)
    {
        const fs::path full = fs::path(directory) / relative;
        ordered_json entry;
        entry["path"] = relative;
        entry["bytes"] = static_cast<std::uint64_t>(fs::file_size(full));
        entry["sha256"] = sha256_file_hex(full.string());
        root.push_back(std::move(entry));
    }
    write_text_file((fs::path(directory) / "manifest.json").string(), root.dump(2) + "\n");
}

} // namespace phc
