#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fockfringe/ensembles.hpp"
#include "fockfringe/estimation.hpp"
#include "fockfringe/quantum_core.hpp"
#include "fockfringe/signal_synth.hpp"

namespace fockfringe::cli {

enum class ScenarioKind { mott, fast_poisson, constructed_pairs, custom };
enum class EnsembleModel { fractions, poisson, tf_poisson };

std::string to_string(ScenarioKind kind);
std::string to_string(EnsembleModel model);
ScenarioKind scenario_kind_from_string(std::string_view text);
EnsembleModel ensemble_model_from_string(std::string_view text);

// Values are held in the units of the config file (kHz, us, ms, nm, um) so a
// parse/serialize/parse cycle is exact; the accessors below convert to SI and
// angular frequencies.
struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::mott;

    double u_over_h_khz = 2.88;
    double v_over_h_khz = 0.0;
    double gamma_per_s = 0.0;
    double split_ratio = 0.5;

    EnsembleModel ensemble = EnsembleModel::fractions;
    std::vector<double> fractions{0.0, 1.0, 0.0, 0.0, 0.0}; // f_0 .. f_Nmax
    double poisson_mean = 1.0;
    double peak_mean = 1.0;
    int ensemble_dimension = 3;
    int max_atoms = 4;
    double excited_fraction = 0.0;

    double trap_atom_number = 2e4;
    double trap_radial_hz = 24.0;
    double trap_axial_hz = 8.0;

    double amplitude = 1.0;
    double tof_ms = 13.0;
    double separation_nm = 407.5;
    double source_width_nm = 0.0; // filled from a 30 E_R site in preset()
    double mass_u = 86.909180527;
    double pixel_pitch_um = 5.0;
    double extent_sigmas = 10.0;

    double pixel_rms = 0.02;
    double contrast_jitter = 0.0;
    double phase_jitter_rad = 0.0;
    std::uint64_t seed = 1;

    double time_start_us = 0.0;
    double time_stop_us = 3e3 / 2.88;
    int time_count = 61;

    double calibration_slope = 40.0;
    double calibration_center = 0.0;

    int fit_max_atoms = 4;
    std::optional<double> fit_fix_u_over_h_khz;
    int fit_dimension = 3;

    std::string output_dir = "out";

    static ScenarioConfig preset(ScenarioKind kind);

    void validate() const;

    SplitterParams splitter() const;
    OccupationDistribution distribution() const;
    std::optional<BandMixture> mixture() const;
    TrapConfig trap() const;
    TOFGeometry geometry() const;
    NoiseSpec noise() const;
    std::vector<double> times() const; // s
    CalibrationModel calibration() const;
    VisibilityFitOptions fit_options() const;
    ProfileDimension fit_profile_dimension() const;

    bool operator==(const ScenarioConfig&) const = default;
};

// `origin` prefixes error messages (`origin:line: ...`).
ScenarioConfig parse_config(std::string_view text, const std::string& origin = "<config>");
ScenarioConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ScenarioConfig& config);
void save_config(const std::filesystem::path& path, const ScenarioConfig& config);

// FNV-1a over the serialized form, 16 hex digits.
std::string config_hash(const ScenarioConfig& config);

} // namespace fockfringe::cli
