#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fockfringe/estimation.hpp"
#include "scenario_config.hpp"

namespace fockfringe::cli {

enum class ExitCode : int { success = 0, config = 2, data = 3, numerical = 4 };

class CommandError : public std::runtime_error {
public:
    CommandError(ExitCode code, std::string kind, const std::string& message)
        : std::runtime_error(message), code_(code), kind_(std::move(kind)) {}
    ExitCode code() const noexcept { return code_; }
    const std::string& kind() const noexcept { return kind_; }

private:
    ExitCode code_;
    std::string kind_;
};

// `error code=<n> kind=<kind> message=<text>` on one line.
std::string failure_line(const CommandError& error);

struct RunSummary {
    std::string config_hash;
    std::vector<std::pair<std::string, double>> timings; // stage, seconds
    std::vector<std::filesystem::path> files;
    std::map<std::string, std::string> values;
};

// Dataset: config.txt, manifest.csv and one profile CSV per time step.
RunSummary cmd_simulate(const ScenarioConfig& config, const std::filesystem::path& out, int workers = 1);

// Writes fringe_fits.csv, trace.csv, ct_fit.csv, derived.csv, summary.txt and timings.txt.
RunSummary cmd_fit(const std::filesystem::path& dataset, const ScenarioConfig& config,
                   const std::filesystem::path& out, int workers = 1);

RunSummary cmd_pipeline(const ScenarioConfig& config, const std::filesystem::path& out, int workers = 1);

struct OracleRow {
    int atoms = 0;
    double modulus_deviation = 0.0;     // brute-force vs (N/2)|cos|^(N-1)
    double phase_deviation = 0.0;       // arg vs +Vt mod pi
    double norm_deviation = 0.0;        // after evolve
    double periodicity_deviation = 0.0; // C(t + T) vs C(t), pure N
    bool pass = false;
};

struct OracleReport {
    std::vector<OracleRow> rows;
    bool pass = false;
};

inline constexpr double kOracleModulusTolerance = 1e-10;
inline constexpr double kOraclePhaseTolerance = 1e-9;
inline constexpr double kOracleNormTolerance = 1e-13;
inline constexpr double kOraclePeriodicityTolerance = 1e-12;

OracleReport cmd_oracle(int max_atoms, int grid_size, const SplitterParams& params);
void write_oracle_report(std::ostream& out, const OracleReport& report);

// Plot data behind the calibration, collapse/revival, phase and occupation panels.
RunSummary cmd_figures(const ScenarioConfig& config, const std::filesystem::path& results,
                       const std::filesystem::path& out);

// Revivals are the maxima of the bright stretches (C >= threshold) of a
// trace; consecutive maxima must be separated by a collapse below it.
struct RevivalAnalysis {
    std::vector<double> times;
    std::vector<double> phases;
    std::vector<double> phase_jumps; // |wrap(phi_k+1 - phi_k)| in [0, pi]
    double spacing = 0.0;            // mean gap, 0 with fewer than two revivals
};

inline constexpr double kPiJumpTolerance = 0.25;

RevivalAnalysis analyze_revivals(const VisibilityTrace& trace, double threshold = 0.5);

// Entry point shared by the executable and the tests; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace fockfringe::cli
