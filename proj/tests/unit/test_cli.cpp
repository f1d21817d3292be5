#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "commands.hpp"
#include "fockfringe/errors.hpp"
#include "fockfringe/profile_io.hpp"
#include "scenario_config.hpp"
#include "worker_pool.hpp"

using namespace fockfringe;
using namespace fockfringe::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("fockfringe_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Invocation {
    int code;
    std::string out;
    std::string err;
};

Invocation invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "fockfringe");
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

ScenarioConfig quiet(ScenarioKind kind) {
    auto c = ScenarioConfig::preset(kind);
    c.pixel_rms = 0.0;
    return c;
}

} // namespace

TEST_CASE("config presets") {
    const auto mott = ScenarioConfig::preset(ScenarioKind::mott);
    CHECK(mott.distribution().fraction(1) == 1.0);
    CHECK(mott.gamma_per_s == 0.0);
    const auto times = mott.times();
    REQUIRE(times.size() == 61);
    CHECK(times.front() == 0.0);
    CHECK(times.back() == doctest::Approx(3.0 * mott.splitter().revival_period()).epsilon(1e-12));

    const auto poisson = ScenarioConfig::preset(ScenarioKind::fast_poisson).distribution();
    CHECK(poisson.max_atoms() == 4);
    CHECK(poisson.fraction(1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    CHECK(ScenarioConfig::preset(ScenarioKind::constructed_pairs).distribution().fraction(2) == 1.0);
    CHECK(ScenarioConfig::preset(ScenarioKind::mott).geometry().envelope_sigma() ==
          doctest::Approx(TOFGeometry::reference().envelope_sigma()).epsilon(1e-12));
}

TEST_CASE("config parse, serialize, parse is the identity") {
    for (auto kind : {ScenarioKind::mott, ScenarioKind::fast_poisson, ScenarioKind::constructed_pairs,
                      ScenarioKind::custom}) {
        const auto c = ScenarioConfig::preset(kind);
        const auto once = parse_config(serialize_config(c));
        CHECK(once == c);
        CHECK(serialize_config(parse_config(serialize_config(once))) == serialize_config(once));
    }
    const auto custom = parse_config(R"(# slow-load state
scenario.kind = custom
splitter.U_over_h_hz = 2880
splitter.V_over_h_khz = 4.9
splitter.gamma_per_s = 200
ensemble.fractions = 0,0.94,0.06
noise.seed = 12345678901234
fit.fix_U_over_h_hz = 2900
)");
    CHECK(custom.max_atoms == 2);
    CHECK(custom.u_over_h_khz == 2.88);
    CHECK(custom.splitter().interaction == doctest::Approx(2.0 * M_PI * 2880.0).epsilon(1e-15));
    CHECK(custom.fit_options().fixed_interaction.has_value());
    CHECK(custom.seed == 12345678901234ULL);
    const auto again = parse_config(serialize_config(custom));
    CHECK(again == custom);
    CHECK(config_hash(again) == config_hash(custom));
    CHECK(config_hash(again).size() == 16);
}

TEST_CASE("config errors name the line") {
    auto message = [](const std::string& text) {
        try {
            parse_config(text, "cfg");
        } catch (const Error& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("a=1\nsplitter.nope=2\n").find("cfg:1") != std::string::npos);
    CHECK(message("noise.seed=1\nsplitter.bogus=2\n").find("cfg:2: unknown key") != std::string::npos);
    CHECK(message("splitter.U_over_h_khz=2.88\nsplitter.U_over_h_hz=2880\n").find("cfg:2") != std::string::npos);
    CHECK(message("scenario.kind=slow\n").find("cfg:1") != std::string::npos);
    CHECK(message("time.count=x\n").find("cfg:1") != std::string::npos);
    CHECK(message("just text\n").find("cfg:1") != std::string::npos);
    CHECK_THROWS_AS(parse_config("ensemble.fractions=0,0.5,0.4\n"), DomainError);
    CHECK_THROWS_AS(parse_config("time.start_us=10\ntime.stop_us=5\n"), DomainError);
    CHECK_THROWS_AS(parse_config("time.count=1\n"), DomainError);
    CHECK_THROWS_AS(parse_config("ensemble.model=poisson\nensemble.max_atoms=13\n"), DomainError);
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
    std::vector<int> out(100, 0);
    parallel_for(out.size(), 8, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
    CHECK(out[99] == 99 * 99);
    try {
        parallel_for(50, 4, [](std::size_t i) {
            if (i % 10 == 7) {
                throw std::runtime_error(std::to_string(i));
            }
        });
        FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()) == "7");
    }
}

TEST_CASE("simulate") {
    SUBCASE("mott, zero noise: constant truth contrast") {
        const auto dir = scratch("sim_mott");
        const auto summary = cmd_simulate(quiet(ScenarioKind::mott), dir, 2);
        const auto rows = io::read_manifest(dir / io::kManifestName);
        REQUIRE(rows.size() == 61);
        for (const auto& row : rows) {
            CHECK(row.true_contrast == 1.0);
        }
        for (const auto& f : summary.files) {
            CHECK(fs::exists(dir / f));
        }
    }
    SUBCASE("fast-poisson: first revival lands on the 347 us grid point") {
        const auto dir = scratch("sim_poisson");
        cmd_simulate(quiet(ScenarioKind::fast_poisson), dir, 2);
        const auto rows = io::read_manifest(dir / io::kManifestName);
        std::size_t first = 0;
        for (std::size_t i = 1; i + 1 < rows.size(); ++i) {
            if (rows[i].true_contrast > 0.5 && rows[i].true_contrast >= rows[i - 1].true_contrast &&
                rows[i].true_contrast >= rows[i + 1].true_contrast) {
                first = i;
                break;
            }
        }
        CHECK(rows[first].time * 1e6 == doctest::Approx(347.2).epsilon(0.5 / 347.2));
        CHECK(rows[first].true_contrast == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("same config twice gives byte-identical datasets") {
        auto config = ScenarioConfig::preset(ScenarioKind::fast_poisson);
        config.seed = 99;
        const auto a = scratch("sim_det_a");
        const auto b = scratch("sim_det_b");
        cmd_simulate(config, a, 1);
        cmd_simulate(config, b, 6);
        for (const auto& entry : fs::directory_iterator(a)) {
            if (entry.path().filename().string().find("timings") != std::string::npos) {
                continue;
            }
            CHECK(slurp(entry.path()) == slurp(b / entry.path().filename()));
        }
    }
    SUBCASE("unwritable output path") {
        try {
            cmd_simulate(quiet(ScenarioKind::mott), "/proc/fockfringe_denied", 1);
            FAIL("expected a failure");
        } catch (const CommandError& e) {
            CHECK(e.code() == ExitCode::config);
            CHECK(std::string(e.what()).find("/proc/fockfringe_denied") != std::string::npos);
        }
    }
}

TEST_CASE("fit") {
    SUBCASE("mott dataset recovers f1 >= 0.9 with identical summaries across worker counts") {
        const auto config = ScenarioConfig::preset(ScenarioKind::mott);
        const auto dir = scratch("fit_mott");
        cmd_simulate(config, dir, 2);
        const auto a = cmd_fit(dir, config, dir / "a", 1);
        const auto b = cmd_fit(dir, config, dir / "b", 4);
        CHECK(io::parse_double(a.values.at("f1"), "f1") >= 0.9);
        CHECK(slurp(dir / "a" / "summary.txt") == slurp(dir / "b" / "summary.txt"));
        CHECK(slurp(dir / "a" / "ct_fit.csv") == slurp(dir / "b" / "ct_fit.csv"));
        for (const auto& f : a.files) {
            CHECK(fs::exists(dir / "a" / f));
        }
        const auto params = io::read_param_csv(dir / "a" / "ct_fit.csv");
        CHECK(params.front().name == "f1");
    }
    SUBCASE("constructed pairs: revivals every T_rev/2 with pi jumps") {
        const auto config = ScenarioConfig::preset(ScenarioKind::constructed_pairs);
        const auto dir = scratch("fit_pairs");
        const auto summary = cmd_pipeline(config, dir, 4);
        const auto& v = summary.values;
        CHECK(io::parse_double(v.at("revival.spacing_over_period"), "s") == doctest::Approx(0.5).epsilon(0.01));
        CHECK(std::stoi(v.at("revival.count")) == 7);
        CHECK(std::stoi(v.at("revival.pi_jumps")) == 6);
        CHECK(io::parse_double(v.at("f2"), "f2") > 0.99);
    }
    SUBCASE("fixed U is echoed") {
        auto config = ScenarioConfig::preset(ScenarioKind::fast_poisson);
        config.fit_fix_u_over_h_khz = 2.9;
        const auto dir = scratch("fit_fixed");
        const auto summary = cmd_pipeline(config, dir, 2);
        CHECK(summary.values.at("U_fixed") == "1");
        CHECK(io::parse_double(summary.values.at("U_over_h_hz"), "U") == doctest::Approx(2900.0).epsilon(1e-12));
    }
    SUBCASE("fast-poisson recovers U and the conditional Poisson fractions") {
        const auto dir = scratch("fit_poisson");
        const auto summary = cmd_pipeline(ScenarioConfig::preset(ScenarioKind::fast_poisson), dir, 4);
        CHECK(io::parse_double(summary.values.at("U_over_h_hz"), "U") == doctest::Approx(2880.0).epsilon(0.01));
        CHECK(io::parse_double(summary.values.at("f2"), "f2") == doctest::Approx(0.2908).epsilon(0.05));
        CHECK(summary.values.at("temperature.status") == "ok");
    }
    SUBCASE("data errors") {
        const auto dir = scratch("fit_errors");
        fs::create_directories(dir);
        io::write_manifest(dir / io::kManifestName, {});
        try {
            cmd_fit(dir, ScenarioConfig::preset(ScenarioKind::mott), dir, 1);
            FAIL("expected a failure");
        } catch (const CommandError& e) {
            CHECK(e.code() == ExitCode::data);
            CHECK(e.kind() == "arity");
        }
    }
}

TEST_CASE("oracle") {
    const auto params = ScenarioConfig::preset(ScenarioKind::mott).splitter();
    const auto six = cmd_oracle(6, 200, params);
    CHECK(six.pass);
    REQUIRE(six.rows.size() == 6);
    for (const auto& row : six.rows) {
        CHECK(row.modulus_deviation < 1e-10);
    }
    CHECK(cmd_oracle(1, 50, params).pass);
    CHECK_THROWS_AS(cmd_oracle(13, 200, params), CapacityError);
}

TEST_CASE("figures") {
    const auto config = ScenarioConfig::preset(ScenarioKind::fast_poisson);
    const auto dir = scratch("figures");
    cmd_pipeline(config, dir, 4);
    const auto summary = cmd_figures(config, dir, dir / "fig");
    for (const auto& f : summary.files) {
        CHECK(fs::exists(dir / "fig" / f));
    }
    const auto fig3c = slurp(dir / "fig" / "fig3c.csv");
    CHECK(fig3c.rfind("t_us,C_mott,C_poisson,C_pairs,C_pairs_x2,C_fit\n", 0) == 0);
    const auto fig2c = slurp(dir / "fig" / "fig2c.csv");
    CHECK(fig2c.find("\n0,0.5,0.5,crossing\n") != std::string::npos);
    const auto fig4b = slurp(dir / "fig" / "fig4b.csv");
    CHECK(fig4b.find("\ntf_curve,") != std::string::npos);
    CHECK(fig4b.find("\nfit,") != std::string::npos);

    try {
        cmd_figures(config, dir / "nothing_here", dir / "fig2");
        FAIL("expected a failure");
    } catch (const CommandError& e) {
        CHECK(e.code() == ExitCode::data);
        CHECK(std::string(e.what()).find("ct_fit.csv") != std::string::npos);
    }
}

TEST_CASE("command line exit codes and single-line failures") {
    const auto dir = scratch("exit");
    auto single_line = [](const std::string& text) {
        return !text.empty() && text.find('\n') == text.size() - 1 && text.rfind("error code=", 0) == 0;
    };

    CHECK(invoke({"--help"}).code == 0);
    CHECK(invoke({"oracle", "--max-n", "6"}).code == 0);

    const auto capacity = invoke({"oracle", "--max-n", "13"});
    CHECK(capacity.code == 2);
    CHECK(single_line(capacity.err));

    const auto usage = invoke({"simulate", "--nonsense"});
    CHECK(usage.code == 2);
    CHECK(single_line(usage.err));

    CHECK(invoke({"fit", "x", "--dimension", "4"}).code == 2);
    CHECK(invoke({"fit", (dir / "missing").string()}).code == 3);

    fs::create_directories(dir);
    {
        std::ofstream cfg(dir / "bad.cfg");
        cfg << "splitter.U_over_h_khz=-2\n";
    }
    const auto bad_config = invoke({"simulate", "--config", (dir / "bad.cfg").string(), "--out", (dir / "o").string()});
    CHECK(bad_config.code == 2);
    CHECK(single_line(bad_config.err));

    const auto data = dir / "data";
    CHECK(invoke({"simulate", "--scenario", "mott", "--out", data.string(), "--seed", "5", "--workers", "2"}).code == 0);
    {
        std::ofstream broken(data / "profile_0002.csv", std::ios::app);
        broken << "1.0,not-a-number\n";
    }
    const auto parse = invoke({"fit", data.string(), "--out", (dir / "fit").string()});
    CHECK(parse.code == 3);
    CHECK(single_line(parse.err));
    CHECK(parse.err.find("profile_0002.csv:") != std::string::npos);

    const auto pipe = invoke({"pipeline", "--scenario", "mott", "--out", (dir / "pipe").string(), "--fix-u", "2880",
                              "--nmax", "3"});
    CHECK(pipe.code == 0);
    CHECK(pipe.out.find("U_fixed=1") != std::string::npos);
    CHECK(pipe.out.find("f3=") != std::string::npos);
    CHECK(pipe.out.find("f4=") == std::string::npos);

    // Every point below the low-signal line: numerical failure.
    {
        std::ofstream cfg(dir / "dark.cfg");
        cfg << "ensemble.excited_fraction=0.49\nnoise.pixel_rms=0\n";
    }
    const auto dark =
        invoke({"pipeline", "--config", (dir / "dark.cfg").string(), "--out", (dir / "dark").string()});
    CHECK(dark.code == 4);
    CHECK(single_line(dark.err));
}
