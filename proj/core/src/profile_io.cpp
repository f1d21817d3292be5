#include "fockfringe/profile_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>
#include <system_error>

#include "fockfringe/errors.hpp"

namespace fockfringe::io {

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string() + " for reading");
    }
    return in;
}

std::string where(const std::filesystem::path& path, int line) {
    return path.string() + ":" + std::to_string(line);
}

void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

void expect_header(std::istream& in, const std::filesystem::path& path, const std::string& header) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError(where(path, 1) + ": empty file, expected header '" + header + "'");
    }
    strip_cr(line);
    if (line != header) {
        throw ParseError(where(path, 1) + ": expected header '" + header + "', got '" + line + "'");
    }
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

} // namespace

std::string format_double(double value) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

double parse_double(const std::string& text, const std::string& context) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = text.data() + text.size();
    if (!text.empty() && *begin == '+') {
        ++begin;
    }
    const auto result = std::from_chars(begin, end, value);
    if (result.ec != std::errc() || result.ptr != end || text.empty()) {
        throw ParseError(context + ": cannot parse number '" + text + "'");
    }
    return value;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::string_view text(line);
    if (!text.empty() && text.back() == '\r') {
        text.remove_suffix(1);
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream stream{std::string(text)};
    while (std::getline(stream, field, ',')) {
        fields.push_back(field);
    }
    if (!text.empty() && text.back() == ',') {
        fields.emplace_back();
    }
    return fields;
}

void write_profile_csv(const std::filesystem::path& path, const FringeProfile& profile) {
    profile.validate();
    auto out = open_for_write(path);
    out << "x_m,intensity\n";
    for (std::size_t i = 0; i < profile.size(); ++i) {
        out << format_double(profile.x[i]) << ',' << format_double(profile.intensity[i]) << '\n';
    }
    finish(out, path);
}

FringeProfile read_profile_csv(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    expect_header(in, path, "x_m,intensity");
    FringeProfile profile;
    std::string line;
    int line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        strip_cr(line);
        if (line.empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 2) {
            throw ParseError(where(path, line_number) + ": expected 2 fields, got " + std::to_string(fields.size()));
        }
        profile.x.push_back(parse_double(fields[0], where(path, line_number)));
        profile.intensity.push_back(parse_double(fields[1], where(path, line_number)));
    }
    return profile;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestRow>& rows) {
    auto out = open_for_write(path);
    out << "index,t_s,file,true_C,true_phi\n";
    for (const auto& row : rows) {
        out << row.index << ',' << format_double(row.time) << ',' << row.file << ','
            << format_double(row.true_contrast) << ',' << format_double(row.true_phase) << '\n';
    }
    finish(out, path);
}

std::vector<ManifestRow> read_manifest(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    expect_header(in, path, "index,t_s,file,true_C,true_phi");
    std::vector<ManifestRow> rows;
    std::string line;
    int line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        strip_cr(line);
        if (line.empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 5) {
            throw ParseError(where(path, line_number) + ": expected 5 fields, got " + std::to_string(fields.size()));
        }
        const auto at = where(path, line_number);
        ManifestRow row;
        const double index = parse_double(fields[0], at);
        if (index != static_cast<int>(index)) {
            throw ParseError(at + ": index must be an integer");
        }
        row.index = static_cast<int>(index);
        row.time = parse_double(fields[1], at);
        row.file = fields[2];
        if (row.file.empty()) {
            throw ParseError(at + ": empty file name");
        }
        row.true_contrast = parse_double(fields[3], at);
        row.true_phase = parse_double(fields[4], at);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_param_csv(const std::filesystem::path& path, const std::vector<ParamRow>& rows) {
    auto out = open_for_write(path);
    out << "param,value,uncertainty\n";
    for (const auto& row : rows) {
        out << row.name << ',' << format_double(row.value) << ',' << format_double(row.uncertainty) << '\n';
    }
    finish(out, path);
}

std::vector<ParamRow> read_param_csv(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    expect_header(in, path, "param,value,uncertainty");
    std::vector<ParamRow> rows;
    std::string line;
    int line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        strip_cr(line);
        if (line.empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) {
            throw ParseError(where(path, line_number) + ": expected 3 fields, got " + std::to_string(fields.size()));
        }
        const auto at = where(path, line_number);
        rows.push_back({fields[0], parse_double(fields[1], at), parse_double(fields[2], at)});
    }
    return rows;
}

void write_key_values(const std::filesystem::path& path, const std::map<std::string, std::string>& values) {
    auto out = open_for_write(path);
    for (const auto& [key, value] : values) {
        out << key << '=' << value << '\n';
    }
    finish(out, path);
}

std::map<std::string, std::string> read_key_values(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    std::map<std::string, std::string> values;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        strip_cr(line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ParseError(where(path, line_number) + ": expected key=value");
        }
        values[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return values;
}

} // namespace fockfringe::io
