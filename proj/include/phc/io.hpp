#pragma once

#include <string>
#include <vector>

#include "phc/analysis.hpp"
#include "phc/fdtd.hpp"
#include "phc/geometry.hpp"
#include "phc/grid.hpp"
#include "phc/tuning.hpp"

namespace phc
{

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// one probe channel as 'time_fs,value' rows preceded by '# key value'
// metadata comments carrying everything needed to re-analyse the series
void write_probe_csv(const std::string& path, const ProbeSeries& series, std::size_t probe);

struct LoadedProbe
{
    double dt = 0.0;         // nm of optical path per step
    int ringdown_start = 0;  // sample index
    FieldProbe probe;
    std::vector<double> samples;

    std::vector<double> ringdown() const;
};

LoadedProbe read_probe_csv(const std::string& path);

void write_spectrum_csv(const std::string& path, const Spectrum& spectrum);

void write_modes_json(const std::string& path, const std::vector<ResonantMode>& modes);
std::vector<ResonantMode> read_modes_json(const std::string& path);

void write_sensitivity_csv(const std::string& path, const SensitivityReport& report);
void write_trace_csv(const std::string& path, const TuningTrace& trace);

// mid-plane permittivity cross-section, one CSV row per y line
void write_eps_slice_csv(const std::string& path, const EpsilonGrid& grid);

// raw little-endian doubles in C order plus a JSON sidecar describing them;
// writes <base>.f64 and <base>.json
void write_snapshot(const std::string& base, const FieldSnapshot& snapshot);

void save_mode_field(const std::string& base, const ModeField& field);
ModeField load_mode_field(const std::string& base);

GrayImage read_png_gray(const std::string& path);
void write_png_gray(const std::string& path, const GrayImage& image);

std::string sha256_file_hex(const std::string& path);

// rescans the directory and writes manifest.json listing every artifact as
// {path, bytes, sha256}, sorted by path
void write_manifest(const std::string& directory);

} // namespace phc
