#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "selftrap/config.hpp"
#include "selftrap/csv.hpp"
#include "selftrap/manifest.hpp"
#include "selftrap/rng.hpp"
#include "selftrap/trap_physics.hpp"

using namespace selftrap;

namespace {

// Scratch directory per test run; removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        std::string pattern = (std::filesystem::temp_directory_path() / "selftrap_io_XXXXXX");
        REQUIRE(mkdtemp(pattern.data()) != nullptr);
        path = pattern;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string cli_binary() {
    const char* env = std::getenv("SELFTRAP_CLI");
    REQUIRE(env != nullptr);
    return env;
}

// Runs the CLI with the given argument string; returns the exit code.
int run_cli(const std::string& args) {
    const std::string cmd = cli_binary() + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    REQUIRE(WIFEXITED(rc));
    return WEXITSTATUS(rc);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    REQUIRE(f.good());
    f << text;
}

}  // namespace

TEST_CASE("default configuration matches the published parameter set") {
    const ResolvedConfig cfg = parse_config_text("", "empty");
    const SystemParams p = cfg.system();
    const SystemParams reference;
    CHECK(p.kappa == reference.kappa);
    CHECK(p.g == reference.g);
    CHECK(p.gamma == reference.gamma);
    CHECK(p.delta_a == reference.delta_a);
    CHECK(p.u0_factor == reference.u0_factor);
    CHECK(p.omega_rec == reference.omega_rec);
    CHECK(p.waist_um == reference.waist_um);

    const DriveConfig d = cfg.drive();
    CHECK(d.delta_c == mhz_to_angular(-3.0));
    CHECK(d.eta == 620.0 * p.kappa);

    const ProtocolConfig c = cfg.protocol();
    CHECK(c.temperature_uK == 100.0);
    CHECK(c.cloud_sigma_um == 1000.0);
    CHECK(c.n_macroparticles == 2000);
    CHECK(c.seed == 1);
    CHECK(c.heating_enabled);
}

TEST_CASE("config overrides, comments, and the power calibration path") {
    const ResolvedConfig cfg = parse_config_text(
        "# comment line\n"
        "kappa_MHz = 5.54   # inline comment\n"
        "\n"
        "power_uW = 0.7\n"
        "seed=42\n",
        "test");
    const SystemParams p = cfg.system();
    CHECK(p.kappa == mhz_to_angular(5.54));
    CHECK(p.g == SystemParams{}.g);  // untouched keys keep their defaults
    CHECK(cfg.protocol().seed == 42);

    // power_uW drives the amplitude through the anchor: at the anchor's own
    // operating point the anchor saturation must come back exactly.
    CHECK(cfg.drive_from_power());
    const DriveConfig d = cfg.drive();
    const CalibrationAnchor anchor = cfg.anchor();
    const double n = d.eta * d.eta /
                     (std::pow(anchor.delta_c - anchor.n_eff_u0, 2) + p.kappa * p.kappa);
    CHECK(saturation_from_photon_number(n, p) == Catch::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("config parser rejects malformed input with line-numbered messages") {
    auto message_of = [](const std::string& text) {
        try {
            parse_config_text(text, "cfg");
            return std::string("(no error)");
        } catch (const ConfigError& e) {
            return std::string(e.what());
        }
    };

    CHECK_THAT(message_of("kapa_MHz = 5\n"),
               Catch::Matchers::ContainsSubstring("cfg:1") &&
                   Catch::Matchers::ContainsSubstring("kappa_MHz"));
    CHECK_THAT(message_of("\nkappa = 5\n"),
               Catch::Matchers::ContainsSubstring("cfg:2") &&
                   Catch::Matchers::ContainsSubstring("missing unit suffix"));
    CHECK_THAT(message_of("kappa_MHz = fast\n"),
               Catch::Matchers::ContainsSubstring("not a number"));
    CHECK_THAT(message_of("kappa_MHz = 2\nkappa_MHz = 3\n"),
               Catch::Matchers::ContainsSubstring("duplicate"));
    CHECK_THAT(message_of("waist_um\n"),
               Catch::Matchers::ContainsSubstring("expected 'key = value'"));
    CHECK_THAT(message_of("eta_over_kappa = 100\npower_uW = 1\n"),
               Catch::Matchers::ContainsSubstring("not both"));

    ResolvedConfig cfg = parse_config_text("n_macroparticles = 12.5\n", "cfg");
    CHECK_THROWS_AS(cfg.protocol(), ConfigError);
    cfg = parse_config_text("heating_enabled = 2\n", "cfg");
    CHECK_THROWS_AS(cfg.protocol(), ConfigError);
    CHECK_THROWS_AS(cfg.get("nonexistent"), ConfigError);
}

TEST_CASE("csv write/read round trip") {
    TempDir dir;
    const std::string path = dir.file("table.csv");

    CsvTable table;
    table.columns = {"t_ms", "value"};
    table.data.resize(2);
    Rng rng(5u);
    for (int i = 0; i < 500; ++i) {
        table.data[0].push_back(0.005 * i);
        // spread over many magnitudes, both signs
        table.data[1].push_back((rng.uniform() - 0.5) * std::pow(10.0, 12.0 * rng.uniform() - 6.0));
    }
    write_csv(path, table);

    const CsvTable back = read_csv(path);
    REQUIRE(back.columns == table.columns);
    REQUIRE(back.n_rows() == table.n_rows());
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t r = 0; r < table.n_rows(); ++r) {
            // 9 significant digits: half an ulp in the 9th digit is at worst
            // 5e-9 relative (leading digit 1).
            const double a = table.data[c][r], b = back.data[c][r];
            CHECK(std::abs(a - b) <= 5e-9 * std::abs(a));
        }

    SECTION("empty table writes a header-only file") {
        CsvTable empty;
        empty.columns = {"a", "b"};
        empty.data.resize(2);
        const std::string p2 = dir.file("empty.csv");
        write_csv(p2, empty);
        std::ifstream f(p2, std::ios::binary);
        std::string content((std::istreambuf_iterator<char>(f)),
                            std::istreambuf_iterator<char>());
        CHECK(content == "a,b\n");
        const CsvTable back2 = read_csv(p2);
        CHECK(back2.columns == empty.columns);
        CHECK(back2.n_rows() == 0);
    }

    SECTION("malformed input is rejected with the line number") {
        const std::string p3 = dir.file("bad.csv");
        write_text(p3, "a,b\n1.0,2.0\n3.0\n");
        CHECK_THROWS_WITH(read_csv(p3), Catch::Matchers::ContainsSubstring(":3"));
        write_text(p3, "a,b\n1.0,zzz\n");
        CHECK_THROWS_WITH(read_csv(p3), Catch::Matchers::ContainsSubstring("zzz"));
        CHECK_THROWS_AS(read_csv(dir.file("missing.csv")), std::runtime_error);
    }

    SECTION("validation rejects ragged and misnamed tables") {
        CsvTable bad;
        bad.columns = {"a"};
        bad.data.resize(2);
        CHECK_THROWS_AS(write_csv(dir.file("x.csv"), bad), std::invalid_argument);
        bad.columns = {"a", "b,c"};
        CHECK_THROWS_AS(write_csv(dir.file("x.csv"), bad), std::invalid_argument);
    }
}

TEST_CASE("sha256 and manifest round trip") {
    TempDir dir;

    SECTION("digest matches the classic test vector") {
        const std::string path = dir.file("abc.txt");
        write_text(path, "abc");
        CHECK(sha256_file(path) ==
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        CHECK(file_size_bytes(path) == 3);
    }

    SECTION("manifest records and verifies outputs") {
        const std::string out = dir.file("data.csv");
        write_text(out, "x\n1\n2\n");

        RunManifest manifest;
        manifest.command = {"selftrap", "simulate", "--out", out};
        manifest.config = {{"kappa_MHz", 2.77}, {"seed", 7.0}};
        manifest.seed = 7;
        manifest.threads = 2;
        manifest.started_utc = utc_timestamp();
        manifest.add_output(out);
        manifest.finished_utc = utc_timestamp();

        const std::string mpath = dir.file("run.manifest.json");
        write_manifest(mpath, manifest);

        const RunManifest back = read_manifest(mpath);
        CHECK(back.command == manifest.command);
        CHECK(back.config == manifest.config);
        CHECK(back.seed == 7);
        CHECK(back.threads == 2);
        REQUIRE(back.outputs.size() == 1);
        CHECK(back.outputs[0].sha256 == manifest.outputs[0].sha256);
        CHECK(verify_manifest_outputs(back).empty());

        write_text(out, "x\n1\n3\n");  // tamper
        const auto mismatches = verify_manifest_outputs(back);
        REQUIRE(mismatches.size() == 1);
        CHECK_THAT(mismatches[0], Catch::Matchers::ContainsSubstring("digest"));

        write_text(mpath, "{ not json");
        CHECK_THROWS_AS(read_manifest(mpath), std::runtime_error);
    }
}

TEST_CASE("command line: usage and error exit codes") {
    TempDir dir;
    CHECK(run_cli("") == 2);
    CHECK(run_cli("no-such-command") == 2);
    CHECK(run_cli("--help") == 0);
    CHECK(run_cli("simulate") == 2);  // missing required --out

    const std::string cfg = dir.file("bad.cfg");
    write_text(cfg, "kapa_MHz = 5\n");
    CHECK(run_cli("trap-curve --config " + cfg + " --out " + dir.file("x.csv")) == 3);

    // degenerate fit data: every point untrapped
    const std::string data = dir.file("flat.csv");
    write_text(data, "power_uW,tau_ms\n0.01,0\n0.02,0\n0.03,0\n0.04,0\n0.05,0\n");
    CHECK(run_cli("fit-heating --data " + data + " --report " + dir.file("r.json")) == 4);
    CHECK(run_cli("fit-heating --data " + dir.file("nope.csv") + " --report " +
                  dir.file("r.json")) == 4);
}

TEST_CASE("command line: trap-curve reproduces the in-process computation") {
    TempDir dir;
    const std::string out = dir.file("curve.csv");
    CHECK(run_cli("trap-curve --out " + out + " --delta-c-mhz -2 --d0 0.627 --d1 1.12 "
                  "--powers 0.02:3.0:50") == 0);
    const CsvTable table = read_csv(out);
    REQUIRE(table.n_rows() == 50);
    REQUIRE(table.columns ==
            std::vector<std::string>{"power_uW", "delta_c_mhz", "d0", "d1", "saturation",
                                     "tau_ms"});

    // every row must agree with a direct library evaluation at that power
    const SystemParams params;
    const CalibrationAnchor anchor;
    const HeatingModel model = HeatingModel::with_temperature_uK(0.627, 1.12, 100.0);
    for (std::size_t r = 0; r < table.n_rows(); ++r) {
        const double power = 0.02 + (3.0 - 0.02) * r / 49.0;
        CHECK(table.column("power_uW")[r] == Catch::Approx(power).margin(1e-10));
        const double s = saturation_from_power(power, anchor, mhz_to_angular(-2.0),
                                               anchor.n_eff_u0, params);
        CHECK(table.column("saturation")[r] == Catch::Approx(s).epsilon(1e-7));
        const double tau = empirical_trapping_time_ms(s, model, params).value_or(0.0);
        CHECK(table.column("tau_ms")[r] == Catch::Approx(tau).epsilon(1e-7).margin(1e-12));
    }

    // trap-curve writes a manifest whose digest matches the file on disk
    const RunManifest manifest = read_manifest(out + ".manifest.json");
    CHECK(verify_manifest_outputs(manifest).empty());
    REQUIRE(manifest.command.size() >= 2);
    CHECK(manifest.command[1] == "trap-curve");
}

TEST_CASE("command line: collapse rerun reproduces outputs byte for byte") {
    TempDir dir;
    const std::string out = dir.file("col.csv");
    REQUIRE(run_cli("collapse --out " + out +
                    " --n0 500 --traces 8 --samples 64 --seed 9 --t-end-ms 40") == 0);
    const std::string digest = sha256_file(out);

    const std::string mpath = out + ".manifest.json";
    CHECK(run_cli("rerun " + mpath) == 0);
    CHECK(sha256_file(out) == digest);

    SECTION("a corrupted recorded digest is detected") {
        RunManifest manifest = read_manifest(mpath);
        manifest.outputs[0].sha256 =
            "0000000000000000000000000000000000000000000000000000000000000000";
        write_manifest(mpath, manifest);
        CHECK(run_cli("rerun " + mpath) == 6);
    }

    SECTION("rerun of a missing or mangled manifest fails cleanly") {
        CHECK(run_cli("rerun " + dir.file("nope.json")) == 4);
    }
}
