#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fockfringe/signal_synth.hpp"

namespace fockfringe::io {

// Profile CSV: header `x_m,intensity`, one sample per row.
void write_profile_csv(const std::filesystem::path& path, const FringeProfile& profile);
FringeProfile read_profile_csv(const std::filesystem::path& path);

// Manifest CSV: header `index,t_s,file,true_C,true_phi`. `file` is relative
// to the manifest's directory.
struct ManifestRow {
    int index = 0;
    double time = 0.0;
    std::string file;
    double true_contrast = 0.0;
    double true_phase = 0.0;
};

inline constexpr const char* kManifestName = "manifest.csv";

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::filesystem::path& path);

// Result tables: header `param,value,uncertainty`.
struct ParamRow {
    std::string name;
    double value = 0.0;
    double uncertainty = 0.0;
};

void write_param_csv(const std::filesystem::path& path, const std::vector<ParamRow>& rows);
std::vector<ParamRow> read_param_csv(const std::filesystem::path& path);

// `key=value` lines, keys sorted.
void write_key_values(const std::filesystem::path& path, const std::map<std::string, std::string>& values);
std::map<std::string, std::string> read_key_values(const std::filesystem::path& path);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text, const std::string& where);

// Splits one CSV line on commas (no quoting in these formats).
std::vector<std::string> split_csv_line(const std::string& line);

} // namespace fockfringe::io
