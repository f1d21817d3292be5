#include "scenario_config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fockfringe/constants.hpp"
#include "fockfringe/errors.hpp"
#include "fockfringe/profile_io.hpp"

namespace fockfringe::cli {

namespace {

using io::format_double;
using io::parse_double;

template <class Int>
Int parse_integer(const std::string& text, const std::string& at) {
    Int value{};
    const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
    if (text.empty() || result.ec != std::errc() || result.ptr != text.data() + text.size()) {
        throw ParseError(at + ": cannot parse integer '" + text + "'");
    }
    return value;
}

std::vector<double> parse_list(const std::string& text, const std::string& at) {
    std::vector<double> values;
    for (const auto& item : io::split_csv_line(text)) {
        values.push_back(parse_double(item, at));
    }
    return values;
}

std::string format_list(const std::vector<double>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        out += (i ? "," : "") + format_double(values[i]);
    }
    return out;
}

std::string trim(std::string_view text) {
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = text.find_last_not_of(" \t\r");
    return std::string(text.substr(first, last - first + 1));
}

using Setter = std::function<void(ScenarioConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::optional<std::string>(const ScenarioConfig&)>;

struct Field {
    std::string key;
    Setter set;
    Getter get; // empty for input-only aliases
};

Field real(std::string key, double ScenarioConfig::*member) {
    return {std::move(key),
            [member](ScenarioConfig& c, const std::string& v, const std::string& at) { c.*member = parse_double(v, at); },
            [member](const ScenarioConfig& c) { return std::optional(format_double(c.*member)); }};
}

Field integer(std::string key, int ScenarioConfig::*member) {
    return {std::move(key),
            [member](ScenarioConfig& c, const std::string& v, const std::string& at) {
                c.*member = parse_integer<int>(v, at);
            },
            [member](const ScenarioConfig& c) { return std::optional(std::to_string(c.*member)); }};
}

Field hz_alias(std::string key, double ScenarioConfig::*member) {
    return {std::move(key),
            [member](ScenarioConfig& c, const std::string& v, const std::string& at) {
                c.*member = parse_double(v, at) / 1e3;
            },
            {}};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        using C = ScenarioConfig;
        std::vector<Field> t;
        t.push_back({"scenario.kind", {}, [](const C& c) { return std::optional(to_string(c.kind)); }});
        t.push_back(real("splitter.U_over_h_khz", &C::u_over_h_khz));
        t.push_back(hz_alias("splitter.U_over_h_hz", &C::u_over_h_khz));
        t.push_back(real("splitter.V_over_h_khz", &C::v_over_h_khz));
        t.push_back(hz_alias("splitter.V_over_h_hz", &C::v_over_h_khz));
        t.push_back(real("splitter.gamma_per_s", &C::gamma_per_s));
        t.push_back(real("splitter.split_ratio", &C::split_ratio));
        t.push_back({"ensemble.model",
                     [](C& c, const std::string& v, const std::string& at) {
                         try {
                             c.ensemble = ensemble_model_from_string(v);
                         } catch (const Error& e) {
                             throw ParseError(at + ": " + e.what());
                         }
                     },
                     [](const C& c) { return std::optional(to_string(c.ensemble)); }});
        t.push_back({"ensemble.fractions",
                     [](C& c, const std::string& v, const std::string& at) { c.fractions = parse_list(v, at); },
                     [](const C& c) { return std::optional(format_list(c.fractions)); }});
        t.push_back(real("ensemble.poisson_mean", &C::poisson_mean));
        t.push_back(real("ensemble.peak_mean", &C::peak_mean));
        t.push_back(integer("ensemble.dimension", &C::ensemble_dimension));
        t.push_back(integer("ensemble.max_atoms", &C::max_atoms));
        t.push_back(real("ensemble.excited_fraction", &C::excited_fraction));
        t.push_back(real("trap.atom_number", &C::trap_atom_number));
        t.push_back(real("trap.radial_hz", &C::trap_radial_hz));
        t.push_back(real("trap.axial_hz", &C::trap_axial_hz));
        t.push_back(real("signal.amplitude", &C::amplitude));
        t.push_back(real("tof.time_ms", &C::tof_ms));
        t.push_back(real("tof.separation_nm", &C::separation_nm));
        t.push_back(real("tof.source_width_nm", &C::source_width_nm));
        t.push_back(real("tof.mass_u", &C::mass_u));
        t.push_back(real("tof.pixel_pitch_um", &C::pixel_pitch_um));
        t.push_back(real("tof.extent_sigmas", &C::extent_sigmas));
        t.push_back(real("noise.pixel_rms", &C::pixel_rms));
        t.push_back(real("noise.contrast_jitter", &C::contrast_jitter));
        t.push_back(real("noise.phase_jitter_rad", &C::phase_jitter_rad));
        t.push_back({"noise.seed",
                     [](C& c, const std::string& v, const std::string& at) { c.seed = parse_integer<std::uint64_t>(v, at); },
                     [](const C& c) { return std::optional(std::to_string(c.seed)); }});
        t.push_back(real("time.start_us", &C::time_start_us));
        t.push_back(real("time.stop_us", &C::time_stop_us));
        t.push_back(integer("time.count", &C::time_count));
        t.push_back(real("calibration.slope", &C::calibration_slope));
        t.push_back(real("calibration.center_lambda", &C::calibration_center));
        t.push_back(integer("fit.max_atoms", &C::fit_max_atoms));
        t.push_back({"fit.fix_U_over_h_khz",
                     [](C& c, const std::string& v, const std::string& at) {
                         if (v.empty() || v == "none") {
                             c.fit_fix_u_over_h_khz.reset();
                         } else {
                             c.fit_fix_u_over_h_khz = parse_double(v, at);
                         }
                     },
                     [](const C& c) -> std::optional<std::string> {
                         if (!c.fit_fix_u_over_h_khz) {
                             return std::nullopt;
                         }
                         return format_double(*c.fit_fix_u_over_h_khz);
                     }});
        t.push_back({"fit.fix_U_over_h_hz",
                     [](C& c, const std::string& v, const std::string& at) {
                         c.fit_fix_u_over_h_khz = parse_double(v, at) / 1e3;
                     },
                     {}});
        t.push_back(integer("fit.dimension", &C::fit_dimension));
        t.push_back({"output.dir", [](C& c, const std::string& v, const std::string&) { c.output_dir = v; },
                     [](const C& c) { return std::optional(c.output_dir); }});
        return t;
    }();
    return table;
}

// Aliases that write the same member; giving both is an error.
std::string canonical_key(const std::string& key) {
    static const std::map<std::string, std::string> aliases{
        {"splitter.U_over_h_hz", "splitter.U_over_h_khz"},
        {"splitter.V_over_h_hz", "splitter.V_over_h_khz"},
        {"fit.fix_U_over_h_hz", "fit.fix_U_over_h_khz"},
    };
    const auto it = aliases.find(key);
    return it == aliases.end() ? key : it->second;
}

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw DomainError("config: " + message);
    }
}

} // namespace

std::string to_string(ScenarioKind kind) {
    switch (kind) {
    case ScenarioKind::mott:
        return "mott";
    case ScenarioKind::fast_poisson:
        return "fast-poisson";
    case ScenarioKind::constructed_pairs:
        return "constructed-pairs";
    case ScenarioKind::custom:
        return "custom";
    }
    return "custom";
}

std::string to_string(EnsembleModel model) {
    switch (model) {
    case EnsembleModel::fractions:
        return "fractions";
    case EnsembleModel::poisson:
        return "poisson";
    case EnsembleModel::tf_poisson:
        return "tf-poisson";
    }
    return "fractions";
}

ScenarioKind scenario_kind_from_string(std::string_view text) {
    for (auto kind : {ScenarioKind::mott, ScenarioKind::fast_poisson, ScenarioKind::constructed_pairs,
                      ScenarioKind::custom}) {
        if (text == to_string(kind)) {
            return kind;
        }
    }
    throw DomainError("unknown scenario kind '" + std::string(text) +
                      "' (expected mott, fast-poisson, constructed-pairs or custom)");
}

EnsembleModel ensemble_model_from_string(std::string_view text) {
    for (auto model : {EnsembleModel::fractions, EnsembleModel::poisson, EnsembleModel::tf_poisson}) {
        if (text == to_string(model)) {
            return model;
        }
    }
    throw DomainError("unknown ensemble model '" + std::string(text) + "' (expected fractions, poisson or tf-poisson)");
}

ScenarioConfig ScenarioConfig::preset(ScenarioKind kind) {
    ScenarioConfig c;
    c.kind = kind;
    c.source_width_nm =
        lattice_site_width(30.0, constants::lattice_wavelength, c.mass_u * constants::atomic_mass_unit) * 1e9;
    switch (kind) {
    case ScenarioKind::mott:
    case ScenarioKind::custom:
        break;
    case ScenarioKind::fast_poisson:
        c.ensemble = EnsembleModel::poisson;
        c.fractions.clear();
        break;
    case ScenarioKind::constructed_pairs:
        c.fractions = {0.0, 0.0, 1.0, 0.0, 0.0};
        break;
    }
    return c;
}

void ScenarioConfig::validate() const {
    require(u_over_h_khz > 0.0, "splitter.U_over_h_khz must be positive");
    require(std::isfinite(v_over_h_khz), "splitter.V_over_h_khz must be finite");
    require(gamma_per_s >= 0.0, "splitter.gamma_per_s must be non-negative");
    require(split_ratio >= 0.0 && split_ratio <= 1.0, "splitter.split_ratio must lie in [0, 1]");
    require(max_atoms >= 1 && max_atoms <= kMaxAtomsPerSite,
            "ensemble.max_atoms must lie in [1, " + std::to_string(kMaxAtomsPerSite) + "]");
    if (ensemble == EnsembleModel::fractions) {
        require(static_cast<int>(fractions.size()) == max_atoms + 1,
                "ensemble.fractions must list f_0 .. f_max_atoms (" + std::to_string(max_atoms + 1) + " values)");
        (void)distribution();
    }
    require(poisson_mean > 0.0, "ensemble.poisson_mean must be positive");
    require(peak_mean > 0.0, "ensemble.peak_mean must be positive");
    require(ensemble_dimension == 2 || ensemble_dimension == 3, "ensemble.dimension must be 2 or 3");
    require(excited_fraction >= 0.0 && excited_fraction <= 1.0, "ensemble.excited_fraction must lie in [0, 1]");
    require(trap_atom_number > 0.0 && trap_radial_hz > 0.0 && trap_axial_hz > 0.0, "trap values must be positive");
    require(amplitude > 0.0, "signal.amplitude must be positive");
    geometry().validate();
    noise().validate();
    require(time_start_us >= 0.0, "time.start_us must be non-negative");
    require(time_count >= 2, "time.count must be at least 2");
    require(time_stop_us > time_start_us, "time grid must be strictly increasing (stop > start)");
    calibration().validate();
    require(fit_max_atoms >= 1 && fit_max_atoms <= kMaxAtomsPerSite,
            "fit.max_atoms must lie in [1, " + std::to_string(kMaxAtomsPerSite) + "]");
    require(!fit_fix_u_over_h_khz || *fit_fix_u_over_h_khz > 0.0, "fit.fix_U_over_h_khz must be positive");
    require(fit_dimension == 2 || fit_dimension == 3, "fit.dimension must be 2 or 3");
    require(!output_dir.empty(), "output.dir must not be empty");
}

SplitterParams ScenarioConfig::splitter() const {
    return SplitterParams::from_hz(u_over_h_khz * 1e3, v_over_h_khz * 1e3, gamma_per_s, split_ratio);
}

OccupationDistribution ScenarioConfig::distribution() const {
    switch (ensemble) {
    case EnsembleModel::poisson:
        return poisson_distribution(poisson_mean, max_atoms);
    case EnsembleModel::tf_poisson:
        return tf_weighted_poisson({peak_mean, profile_dimension_from_int(ensemble_dimension)}, max_atoms);
    case EnsembleModel::fractions:
        break;
    }
    return OccupationDistribution(fractions);
}

std::optional<BandMixture> ScenarioConfig::mixture() const {
    if (excited_fraction == 0.0) {
        return std::nullopt;
    }
    return BandMixture{excited_fraction};
}

TrapConfig ScenarioConfig::trap() const {
    auto trap = TrapConfig::reference();
    trap.atom_number = trap_atom_number;
    trap.radial_frequency = constants::two_pi * trap_radial_hz;
    trap.axial_frequency = constants::two_pi * trap_axial_hz;
    trap.atomic_mass = mass_u * constants::atomic_mass_unit;
    return trap;
}

TOFGeometry ScenarioConfig::geometry() const {
    TOFGeometry g;
    g.tof = tof_ms * 1e-3;
    g.separation = separation_nm * 1e-9;
    g.source_width = source_width_nm * 1e-9;
    g.mass = mass_u * constants::atomic_mass_unit;
    g.pixel_pitch = pixel_pitch_um * 1e-6;
    g.extent = extent_sigmas * g.envelope_sigma();
    return g;
}

NoiseSpec ScenarioConfig::noise() const {
    return {pixel_rms, contrast_jitter, phase_jitter_rad, seed};
}

std::vector<double> ScenarioConfig::times() const {
    std::vector<double> t(static_cast<std::size_t>(time_count));
    const double step = (time_stop_us - time_start_us) / (time_count - 1);
    for (int i = 0; i < time_count; ++i) {
        t[static_cast<std::size_t>(i)] = (i + 1 == time_count ? time_stop_us : time_start_us + step * i) * 1e-6;
    }
    return t;
}

CalibrationModel ScenarioConfig::calibration() const {
    return {calibration_slope, calibration_center};
}

VisibilityFitOptions ScenarioConfig::fit_options() const {
    VisibilityFitOptions options;
    options.max_atoms = fit_max_atoms;
    if (fit_fix_u_over_h_khz) {
        options.fixed_interaction = constants::two_pi * *fit_fix_u_over_h_khz * 1e3;
    }
    return options;
}

ProfileDimension ScenarioConfig::fit_profile_dimension() const {
    return profile_dimension_from_int(fit_dimension);
}

ScenarioConfig parse_config(std::string_view text, const std::string& origin) {
    struct Entry {
        std::string value;
        int line;
    };
    std::map<std::string, Entry> entries;
    std::map<std::string, std::string> seen_canonical;
    std::istringstream stream{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(stream, line)) {
        ++number;
        const auto at = origin + ":" + std::to_string(number);
        const auto content = trim(line);
        if (content.empty() || content.front() == '#') {
            continue;
        }
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            throw ParseError(at + ": expected key=value");
        }
        auto key = trim(std::string_view(content).substr(0, eq));
        auto value = trim(std::string_view(content).substr(eq + 1));
        if (key.empty()) {
            throw ParseError(at + ": empty key");
        }
        const auto canonical = canonical_key(key);
        if (const auto dup = seen_canonical.find(canonical); dup != seen_canonical.end()) {
            throw ParseError(at + ": '" + key + "' repeats '" + dup->second + "'");
        }
        seen_canonical.emplace(canonical, key);
        entries.emplace(key, Entry{std::move(value), number});
    }

    auto config = ScenarioConfig::preset(ScenarioKind::mott);
    if (const auto it = entries.find("scenario.kind"); it != entries.end()) {
        try {
            config = ScenarioConfig::preset(scenario_kind_from_string(it->second.value));
        } catch (const DomainError& e) {
            throw ParseError(origin + ":" + std::to_string(it->second.line) + ": " + e.what());
        }
    }
    const bool fractions_given = entries.contains("ensemble.fractions");
    const bool max_atoms_given = entries.contains("ensemble.max_atoms");

    for (const auto& [key, entry] : entries) {
        if (key == "scenario.kind") {
            continue;
        }
        const auto at = origin + ":" + std::to_string(entry.line);
        const auto field = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return f.key == key; });
        if (field == fields().end() || !field->set) {
            throw ParseError(at + ": unknown key '" + key + "'");
        }
        field->set(config, entry.value, at);
    }
    if (fractions_given && !max_atoms_given) {
        config.max_atoms = static_cast<int>(config.fractions.size()) - 1;
    }
    config.validate();
    return config;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open config " + path.string());
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

std::string serialize_config(const ScenarioConfig& config) {
    std::string out;
    for (const auto& field : fields()) {
        if (!field.get) {
            continue;
        }
        if (const auto value = field.get(config)) {
            out += field.key + "=" + *value + "\n";
        }
    }
    return out;
}

void save_config(const std::filesystem::path& path, const ScenarioConfig& config) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << serialize_config(config);
    if (!out.flush()) {
        throw IoError("failed writing " + path.string());
    }
}

std::string config_hash(const ScenarioConfig& config) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : serialize_config(config)) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(hash));
    return buffer;
}

} // namespace fockfringe::cli
