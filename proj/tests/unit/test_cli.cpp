#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "qsi/cli/commands.hpp"
#include "qsi/cli/config.hpp"
#include "qsi/core/constants.hpp"
#include "qsi/core/errors.hpp"

using namespace qsi;
using qsi::cli::Json;
namespace fs = std::filesystem;

namespace
{
struct Result
{
    int code;
    std::string out;
    std::string err;
};

Result qsi_run(std::vector<std::string> const& args)
{
    std::ostringstream out, err;
    int const code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch()
{
    static fs::path const dir = [] {
        auto d = fs::temp_directory_path() / ("qsi_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string write_file(std::string const& name, std::string const& text)
{
    auto const p = scratch() / name;
    std::ofstream(p) << text;
    return p.string();
}

std::string slurp(std::string const& path)
{
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

Json read_json(std::string const& path)
{
    return Json::parse(slurp(path));
}

// rows of a CSV without comment lines or the header
std::vector<std::vector<std::string>> csv_rows(std::string const& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line))
    {
        if (line.empty() || line[0] == '#')
            continue;
        if (header)
        {
            header = false;
            continue;
        }
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ','))
            cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

void collect_leaves(Json const& j, std::string const& prefix, std::vector<std::string>& out)
{
    if (!j.is_object())
    {
        out.push_back(prefix);
        return;
    }
    for (auto const& [k, v] : j.items())
        collect_leaves(v, prefix.empty() ? k : prefix + "." + k, out);
}

double riccati_derivative(double (*f)(unsigned, double), int l, double x)
{
    return l / x * f(l, x) - f(l + 1, x);
}

double sph_j(unsigned l, double x) { return std::sph_bessel(l, x); }
double sph_n(unsigned l, double x) { return std::sph_neumann(l, x); }

// attractive well of depth V0, radius R
double square_well_oracle(double V0, double R, double mu, double k, int l)
{
    double const K = std::sqrt(k * k + 2 * mu * V0 / (constants::hbar * constants::hbar));
    double const jk = sph_j(l, k * R), nk = sph_n(l, k * R);
    double const jK = sph_j(l, K * R);
    double const djk = riccati_derivative(sph_j, l, k * R);
    double const dnk = riccati_derivative(sph_n, l, k * R);
    double const djK = riccati_derivative(sph_j, l, K * R);
    double const num = k * djk * jK - K * jk * djK;
    double const den = k * dnk * jK - K * nk * djK;
    return std::atan(num / den);
}

double mod_pi_distance(double a, double b)
{
    double d = std::fmod(a - b, M_PI);
    if (d > M_PI / 2)
        d -= M_PI;
    if (d < -M_PI / 2)
        d += M_PI;
    return std::abs(d);
}

std::string const golden_csv = std::string(QSI_TEST_DATA_DIR) + "/golden_fringe_T0115.csv";
std::string const golden_cfg = std::string(QSI_TEST_DATA_DIR) + "/golden_T0115.json";
}  // namespace

TEST_CASE("print-defaults lists every leaf with a provenance tag")
{
    auto const r = qsi_run({"--print-defaults"});
    REQUIRE(r.code == 0);

    std::set<std::string> printed;
    std::istringstream in(r.out);
    std::string line;
    int lines = 0;
    while (std::getline(in, line))
    {
        ++lines;
        auto const eq = line.find(" = ");
        REQUIRE(eq != std::string::npos);
        printed.insert(line.substr(0, eq));
        bool const tagged = line.find(" [paper]") != std::string::npos
                            || line.find(" [assumption]") != std::string::npos;
        CHECK_MESSAGE(tagged, line);
    }
    CHECK(lines == static_cast<int>(cli::default_registry().size()));

    std::vector<std::string> leaves;
    collect_leaves(cli::default_config_json(), "", leaves);
    CHECK(leaves.size() > 50);
    for (auto const& leaf : leaves)
    {
        bool covered = false;
        for (std::string p = leaf;; )
        {
            if (printed.count(p))
            {
                covered = true;
                break;
            }
            auto const dot = p.rfind('.');
            if (dot == std::string::npos)
                break;
            p.resize(dot);
        }
        CHECK_MESSAGE(covered, leaf);
    }
}

TEST_CASE("defaults document matches the built-in setup")
{
    auto const d = cli::default_config();
    collider::ExperimentSetup const ref;
    CHECK(d.setup.plan.v_launch1 == ref.plan.v_launch1);
    CHECK(d.setup.plan.dt_launch == ref.plan.dt_launch);
    CHECK(d.setup.plan.z_detect == ref.plan.z_detect);
    CHECK(d.setup.cloud1.peak_density == ref.cloud1.peak_density);
    CHECK(d.setup.cloud2.temperature == ref.cloud2.temperature);
    CHECK(d.setup.detection.probe_bandwidth == ref.detection.probe_bandwidth);
    CHECK(d.setup.detection.efficiency == ref.detection.efficiency);
    CHECK(d.setup.ramsey.points == ref.ramsey.points);
    CHECK(d.setup.sim.samples == ref.sim.samples);
    CHECK(d.setup.sim.repetitions == ref.sim.repetitions);

    // an empty document resolves to the same configuration
    CHECK(cli::config_hash(cli::parse_config("{}")) == cli::config_hash(d));
}

TEST_CASE("config errors name the field and exit with 2")
{
    SUBCASE("unknown key")
    {
        auto const p = write_file("unknown.json", R"({"cloud1": {"temprature_K": 1e-6}})");
        auto const r = qsi_run({"--config", p, "fringes"});
        CHECK(r.code == 2);
        CHECK(r.err.find("cloud1.temprature_K") != std::string::npos);
    }
    SUBCASE("wrong type")
    {
        auto const p = write_file("type.json", R"({"ramsey": {"points": "many"}})");
        auto const r = qsi_run({"--config", p, "fringes"});
        CHECK(r.code == 2);
        CHECK(r.err.find("ramsey.points") != std::string::npos);
    }
    SUBCASE("syntax error")
    {
        auto const p = write_file("syntax.json", "{\n  \"seed\": 3,\n  \"noise\": tru\n}\n");
        auto const r = qsi_run({"--config", p, "fringes"});
        CHECK(r.code == 2);
        CHECK(r.err.find("line 3") != std::string::npos);
    }
    SUBCASE("invalid value")
    {
        auto const p = write_file("invalid.json", R"({"cloud2": {"temperature_K": -1}})");
        auto const r = qsi_run({"--config", p, "fringes"});
        CHECK(r.code == 2);
        CHECK(r.err.find("cloud2") != std::string::npos);
    }
    SUBCASE("bad geometry")
    {
        auto const p = write_file("geometry.json", R"({"launch": {"dt_launch_s": -0.01}})");
        CHECK(qsi_run({"--config", p, "fringes"}).code == 2);
    }
    SUBCASE("bad command line")
    {
        CHECK(qsi_run({"fringes", "--bogus"}).code == 2);
        CHECK(qsi_run({}).code == 2);
    }
}

TEST_CASE("parse_config behaviour")
{
    SUBCASE("cm/s keys convert to m/s")
    {
        auto const c = cli::parse_config(R"({"detection": {"probe_vz_cm_per_s": 1.5}})");
        CHECK(c.setup.detection.probe_vz == doctest::Approx(0.015).epsilon(1e-15));
        CHECK(c.resolved["detection"]["probe_vz_m_per_s"].get<double>()
              == doctest::Approx(0.015).epsilon(1e-15));
    }
    SUBCASE("both unit spellings is an error")
    {
        CHECK_THROWS_AS(cli::parse_config(
                            R"({"detection": {"probe_vz_cm_per_s": 1.5, "probe_vz_m_per_s": 0.01}})"),
                        ConfigError);
    }
    SUBCASE("64-bit seed")
    {
        auto const c = cli::parse_config(R"({"seed": 18446744073709551615})");
        CHECK(c.seed == 18446744073709551615ull);
    }
    SUBCASE("hash depends on physics, not on key order")
    {
        auto const a = cli::parse_config(R"({"seed": 4, "noise": false})");
        auto const b = cli::parse_config(R"({"noise": false, "seed": 4})");
        auto const c = cli::parse_config(R"({"noise": false, "seed": 5})");
        CHECK(cli::config_hash(a) == cli::config_hash(b));
        CHECK(cli::config_hash(a) != cli::config_hash(c));
    }
    SUBCASE("fnv1a64 reference values")
    {
        CHECK(cli::fnv1a64("") == 0xcbf29ce484222325ull);
        CHECK(cli::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
    }
}

TEST_CASE("phaseshifts of a square well match the closed form")
{
    double const V0 = 5e-26, R = 2e-9;
    auto const cfg = write_file("well.json", R"({"channels": {"state3": {"kind": "square_well", "depth_J": 5e-26, "radius_m": 2e-9}}})");
    auto const out = (scratch() / "well.csv").string();
    auto const r = qsi_run({"--config", cfg, "--no-timestamp", "--out", out, "phaseshifts",
                            "--channel", "state3", "--points", "201", "--l-max", "2"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    double const mu = constants::cs_mass / 2;
    auto const rows = csv_rows(slurp(out));
    REQUIRE(rows.size() == 201 * 3);
    for (auto const& row : rows)
    {
        double const k = std::stod(row[0]);
        int const l = std::stoi(row[1]);
        double const delta = std::stod(row[2]);
        CHECK_MESSAGE(mod_pi_distance(delta, square_well_oracle(V0, R, mu, k, l)) < 1e-6,
                      "k=" << k << " l=" << l);
    }
}

TEST_CASE("phaseshifts of an empty well are zero")
{
    auto const cfg = write_file("empty.json", R"({"channels": {"state4": {"kind": "square_well", "depth_J": 0, "radius_m": 2e-9}}})");
    auto const r = qsi_run({"--config", cfg, "--no-timestamp", "phaseshifts", "--channel", "state4"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto const rows = csv_rows(r.out);
    CHECK(rows.size() == 41 * 3);
    for (auto const& row : rows)
        CHECK(std::abs(std::stod(row[2])) < 1e-12);
}

TEST_CASE("veldist without Cloud 1 atoms has no difference signal")
{
    auto const cfg = write_file("n0.json", R"({"cloud1": {"peak_density_per_m3": 0}})");
    auto const r = qsi_run({"--config", cfg, "--no-noise", "--no-timestamp", "veldist"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto const rows = csv_rows(r.out);
    CHECK(rows.size() == 161);
    double total = 0;
    for (auto const& row : rows)
    {
        CHECK(std::stod(row[5]) == 0.0);
        total += std::stod(row[2]);
    }
    CHECK(total > 0);
}

TEST_CASE("golden fringe file fits to the injected phase")
{
    auto const r = qsi_run({"fit", "--in", golden_csv});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto const j = Json::parse(r.out);
    CHECK(std::abs(j["phi_rad"].get<double>() + 0.141) < 1e-9);
    CHECK(j["converged"].get<bool>());
    CHECK(std::abs(j["T_s"].get<double>() - 0.115) < 1e-12);
    CHECK(j.contains("_meta"));
    CHECK(j["input_hash"].get<std::string>().size() == 16);

    // the golden file is reproduced bit for bit
    auto const regen = qsi_run({"--config", golden_cfg, "--no-timestamp", "fringes"});
    REQUIRE_MESSAGE(regen.code == 0, regen.err);
    CHECK(regen.out == slurp(golden_csv));
}

TEST_CASE("fringes round trip through fit")
{
    auto const csv = (scratch() / "rt.csv").string();
    auto const fitted = (scratch() / "rt.json").string();
    REQUIRE(qsi_run({"--no-noise", "--no-timestamp", "--out", csv, "fringes"}).code == 0);
    auto const r = qsi_run({"--out", fitted, "fit", "--in", csv});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto const j = read_json(fitted);
    CHECK(std::abs(j["phi_rad"].get<double>() + 0.141) < 1e-9);

    auto const central = qsi_run({"fit", "--in", csv, "--window", "central"});
    REQUIRE(central.code == 0);
    CHECK(std::abs(Json::parse(central.out)["phi_rad"].get<double>() + 0.141) < 1e-9);
}

TEST_CASE("outputs are byte-identical across runs and thread counts")
{
    auto const a = qsi_run({"--seed", "7", "--threads", "1", "--no-timestamp", "fringes"});
    auto const b = qsi_run({"--seed", "7", "--threads", "4", "--no-timestamp", "fringes"});
    auto const c = qsi_run({"--seed", "7", "--threads", "3", "--no-timestamp", "fringes"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    CHECK(a.out == c.out);
    CHECK(a.out.rfind("# qsi fringes config_hash=", 0) == 0);

    auto const d = qsi_run({"--seed", "8", "--threads", "4", "--no-timestamp", "fringes"});
    CHECK(d.out != a.out);

    auto const stamped = qsi_run({"--seed", "7", "fringes"});
    CHECK(stamped.out.find("# generated ") != std::string::npos);
}

TEST_CASE("campaign over T pools to the injected phase")
{
    auto const out = (scratch() / "campT.json").string();
    auto const r = qsi_run({"--seed", "11", "--no-timestamp", "--out", out, "campaign", "--vary",
                            "T", "--values", "0.115,0.233,0.450"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    auto const j = read_json(out);
    double const phi = j["pooled_phi_rad"].get<double>();
    double const err = j["pooled_phi_err_rad"].get<double>();
    CHECK(err > 0);
    CHECK(std::abs(phi + 0.141) < 2 * err);
    CHECK(j["points"].size() == 3);
    CHECK(std::abs(j["slope"].get<double>()) < 2 * j["slope_err"].get<double>());

    auto const points = slurp((scratch() / "campT.points.csv").string());
    CHECK(csv_rows(points).size() == 3);
}

TEST_CASE("fit failures")
{
    SUBCASE("missing input file is a runtime error")
    {
        auto const r = qsi_run({"fit", "--in", (scratch() / "nope.csv").string()});
        CHECK(r.code == 1);
        CHECK(r.err.find("nope.csv") != std::string::npos);
    }
    SUBCASE("unknown T")
    {
        auto const p = write_file("noT.csv", "detuning_hz,counts,sigma\n0,1,1\n");
        CHECK(qsi_run({"fit", "--in", p}).code == 2);
    }
    SUBCASE("too few points")
    {
        auto const p = write_file("few.csv", "detuning_hz,counts,sigma\n0,1,1\n1,2,1\n");
        CHECK(qsi_run({"fit", "--in", p, "--T", "0.1"}).code == 2);
    }
}
