#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbmflow/cli.hpp"
#include "gbmflow/io.hpp"
#include "gbmflow/model.hpp"

using namespace gbmflow;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::runtime_error("no column " + name);
    }
    std::vector<double> column(const std::string& name) const {
        std::vector<double> v;
        const auto c = col(name);
        for (const auto& r : rows) v.push_back(r[c]);
        return v;
    }
};

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
}

Csv read_csv(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    Csv csv;
    std::getline(in, line);
    csv.header = split(line);
    while (std::getline(in, line)) {
        std::vector<double> row;
        for (const auto& c : split(line)) row.push_back(std::stod(c));
        csv.rows.push_back(row);
    }
    return csv;
}

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    return nlohmann::json::parse(in);
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("gbmflow_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    static int& counter() {
        static int c = 0;
        return c;
    }
};

const std::vector<std::string> kFig2{"--mu", "0.1", "--sigma", "0.1414213562373095", "--x0", "2"};
const std::vector<std::string> kFig4{"--mu", "0.05", "--sigma", "0.1414213562373095", "--x0", "2", "--x-target", "3"};

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("formatting and sibling paths") {
    CHECK(format_double(0.1) == "0.10000000000000001");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK(format_double(std::nan("")) == "nan");
    CHECK(format_double(-INFINITY) == "-inf");
    CHECK(sibling_path("runs/a.csv", ".manifest.json") == fs::path("runs/a.manifest.json"));
    CsvTable t;
    t.add_column("a", {1.0, 2.0});
    t.add_column("b", {3.0, 4.0});
    CHECK(t.render() == "a,b\n1,3\n2,4\n");
    CHECK_THROWS_AS(t.add_column("c", {1.0}), ParameterError);
}

TEST_CASE("version, usage errors and exit codes") {
    auto r = run({"--version"});
    CHECK(r.code == 0);
    CHECK(r.out.find(kToolVersion) != std::string::npos);
    CHECK(run({}).code == kExitInvalid);
    CHECK(run({"nonsense"}).code == kExitInvalid);
    TempDir d;
    // Missing required model flag.
    CHECK(run({"stationary", "--mu", "0.1", "--x0", "2", "--out", d.file("a.csv")}).code == kExitInvalid);
    r = run(cat({"stationary", "--out", d.file("a.csv"), "--lambda-m", "0.5"}, {"--mu", "0.1", "--sigma", "-1", "--x0", "2"}));
    CHECK(r.code == kExitInvalid);
    CHECK(r.err.find("sigma must be positive") != std::string::npos);
    r = run(cat({"stationary", "--out", d.file("a.csv"), "--lambda-r", "1"}, kFig2));
    CHECK(r.code == kExitInvalid);
    CHECK(r.err.find("no stationary state") != std::string::npos);
    r = run({"fpt", "--mu", "0.05", "--sigma", "0.1", "--x0", "2", "--x-target", "1", "--out", d.file("f.csv")});
    CHECK(r.code == kExitInvalid);
    CHECK(run(cat({"mfpt", "--alpha", "0", "--out", d.file("m.csv")}, kFig4)).code == kExitInvalid);
    CHECK_FALSE(fs::exists(d.file("a.csv")));
}

TEST_CASE("stationary curve with a Monte Carlo column") {
    TempDir d;
    const auto out = d.file("ss.csv");
    const auto r = run(cat({"stationary", "--out", out, "--lambda-r", "100", "--lambda-m", "0.5", "--mc", "--paths", "20",
                            "--seed", "3", "--threads", "1", "--t-relax", "10"},
                           kFig2));
    REQUIRE(r.code == 0);
    const auto csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"x", "f_analytic", "f_mc", "f_mc_se"});
    CHECK(csv.rows.size() <= 400);
    // Log-spaced grid: integrate x f(x) in log x. The cusp at x0 limits the
    // trapezoid to a few parts in a thousand at 400 points.
    const auto xs = csv.column("x"), f = csv.column("f_analytic");
    double mass = 0.0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        mass += 0.5 * (xs[i] * f[i] + xs[i - 1] * f[i - 1]) * std::log(xs[i] / xs[i - 1]);
    CHECK(mass == doctest::Approx(1.0).epsilon(5e-3));

    const auto m = read_json(d.file("ss.manifest.json"));
    for (const char* key : {"command", "argv", "params", "seed", "n_paths", "grid", "tool_version", "timestamp", "outputs"})
        CHECK(m.contains(key));
    CHECK(m["command"] == "stationary");
    CHECK(m["seed"] == 3);
    CHECK(m["n_paths"] == 20);
    CHECK(m["params"]["lambda_m"] == 0.5);
    CHECK(m["grid"]["points"] == csv.rows.size());
    for (const auto& e : fs::directory_iterator(d.path)) CHECK(e.path().extension() != ".tmp");
}

TEST_CASE("grid flags apply to the default stationary range") {
    TempDir d;
    const auto out = d.file("g.csv");
    REQUIRE(run(cat({"stationary", "--out", out, "--lambda-r", "100", "--lambda-m", "0.5", "--points", "50"}, kFig2)).code == 0);
    auto xs = read_csv(out).column("x");
    CHECK(xs.size() <= 50);
    CHECK(xs.size() > 10);
    CHECK(xs[2] / xs[1] == doctest::Approx(xs[1] / xs[0]));
    REQUIRE(run(cat({"stationary", "--out", out, "--lambda-r", "100", "--lambda-m", "0.5", "--points", "50", "--linear-grid"},
                    kFig2))
                .code == 0);
    xs = read_csv(out).column("x");
    CHECK(xs[2] - xs[1] == doctest::Approx(xs[1] - xs[0]));
}

TEST_CASE("finite-time density") {
    TempDir d;
    const auto out = d.file("d.csv");
    REQUIRE(run(cat({"density", "--out", out, "--lambda-r", "100", "--lambda-m", "0.5", "--t", "5", "--points", "50"}, kFig2))
                .code == 0);
    const auto csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"x", "f_analytic"});
    CHECK(csv.rows.size() == 50);
    CHECK(run(cat({"density", "--out", out, "--t", "0"}, kFig2)).code == kExitInvalid);
}

TEST_CASE("moments and log-moments") {
    TempDir d;
    auto out = d.file("m.csv");
    REQUIRE(run(cat({"moments", "--out", out, "--lambda-r", "100", "--lambda-m", "0.5", "--t-max", "200", "--points", "5"}, kFig2))
                .code == 0);
    auto csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"t", "mean", "msd"});
    CHECK(csv.rows.front() == std::vector<double>{0.0, 2.0, 0.0});
    CHECK(csv.rows.back()[1] == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(csv.rows.back()[2] == doctest::Approx(1.142857142857).epsilon(1e-6));
    auto m = read_json(d.file("m.manifest.json"));
    CHECK(m["results"]["first_moment"]["regime"] == "saturating");

    REQUIRE(run(cat({"moments", "--out", out, "--lambda-r", "100", "--lambda-m-beta", "2", "--points", "3"}, kFig2)).code == 0);
    m = read_json(d.file("m.manifest.json"));
    CHECK(m["params"]["lambda_m"].get<double>() == doctest::Approx(0.22));
    CHECK(m["results"]["second_moment"]["regime"] == "linear");

    out = d.file("mc.csv");
    REQUIRE(run(cat({"moments", "--out", out, "--lambda-r", "100", "--lambda-m", "0.5", "--t-max", "2", "--points", "3", "--mc",
                     "--paths", "10", "--threads", "1"},
                    kFig2))
                .code == 0);
    csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"t", "mean", "msd", "mean_mc", "mean_se", "msd_mc", "msd_se"});

    out = d.file("l.csv");
    REQUIRE(run(cat({"logmoments", "--out", out, "--lambda-r", "100", "--lambda-m", "0.5", "--points", "4"}, kFig2)).code == 0);
    csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"t", "log_mean", "log_msd"});
    CHECK(csv.rows.front()[1] == doctest::Approx(std::log(2.0)));
    const auto s = read_json(d.file("l.summary.json"));
    CHECK(s["log_mean_asymptote"].get<double>() == doctest::Approx(0.87315).epsilon(1e-5));
    CHECK(s["log_msd_asymptote"].get<double>() == doctest::Approx(0.1048).epsilon(1e-9));
}

TEST_CASE("relaxation boundary") {
    TempDir d;
    const auto out = d.file("b.csv");
    REQUIRE(run(cat({"boundary", "--out", out, "--lambda-r", "100", "--lambda-m", "0.5", "--t-max", "10", "--points", "2"}, kFig2))
                .code == 0);
    const auto csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"t", "x_low", "x_high"});
    CHECK(csv.rows[0][1] == 2.0);
    CHECK(csv.rows[1][2] == doctest::Approx(2.0 * std::exp(1.6763)).epsilon(1e-4));
}

TEST_CASE("first-passage densities") {
    TempDir d;
    auto out = d.file("f.csv");
    REQUIRE(run(cat({"fpt", "--out", out, "--t-max", "50", "--points", "25", "--mc", "--paths", "200", "--threads", "1"}, kFig4))
                .code == 0);
    auto csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"t", "p_analytic", "p_mc", "p_mc_se"});
    CHECK(csv.rows.size() == 25);
    out = d.file("o.csv");
    REQUIRE(run(cat({"fpt", "--mode", "open", "--lambda-r", "10", "--lambda-m", "0.8", "--out", out, "--t-max", "20"}, kFig4))
                .code == 0);
    csv = read_csv(out);
    CHECK(csv.rows.size() == 201);
    CHECK(run(cat({"fpt", "--mode", "sideways", "--out", out}, kFig4)).code == kExitInvalid);
}

TEST_CASE("MFPT scan, locus and speed-up") {
    TempDir d;
    auto out = d.file("m.csv");
    REQUIRE(run(cat({"mfpt", "--alpha", "10", "--out", out, "--points", "9"}, kFig4)).code == 0);
    auto csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"lambda_m", "mfpt"});
    CHECK(csv.rows.size() == 9);
    auto s = read_json(d.file("m.summary.json"));
    CHECK(s["lambda_m_star"].get<double>() == doctest::Approx(0.437745).epsilon(1e-5));
    CHECK(s["boundary"] == "interior");
    CHECK_FALSE(s["params"].contains("lambda_r"));

    out = d.file("mc.csv");
    REQUIRE(run(cat({"mfpt", "--alpha", "10", "--out", out, "--points", "3", "--mc", "--paths", "50", "--threads", "1"}, kFig4))
                .code == 0);
    CHECK(read_csv(out).header == std::vector<std::string>{"lambda_m", "mfpt", "mfpt_mc", "mfpt_se"});

    out = d.file("loc.csv");
    REQUIRE(run(cat({"mfpt", "--optimal-locus", "--alpha-min", "2", "--alpha-max", "4", "--alpha-points", "3", "--out", out,
                     "--points", "11"},
                    kFig4))
                .code == 0);
    csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"alpha", "lambda_m_star", "mfpt_star", "residual", "boundary"});
    CHECK(csv.rows[0][1] == doctest::Approx(0.223575).epsilon(1e-5));

    out = d.file("sp.csv");
    REQUIRE(run(cat({"speedup", "--alpha-min", "1", "--alpha-max", "2", "--alpha-points", "3", "--out", out}, kFig4)).code == 0);
    csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"alpha", "epsilon", "lambda_m_star", "mfpt_exit_star"});
    CHECK(csv.rows[0][1] > 1.0);
    s = read_json(d.file("sp.summary.json"));
    CHECK(s["alpha_c"].get<double>() == doctest::Approx(1.8).epsilon(0.2 / 1.8));
    CHECK(s["r_star"].get<double>() == doctest::Approx(0.033319).epsilon(1e-4));
}

TEST_CASE("population and raw simulations") {
    TempDir d;
    auto out = d.file("p.csv");
    REQUIRE(run(cat({"population", "--out", out, "--lambda-r", "1", "--lambda-m", "1", "--runs", "500", "--threads", "1"}, kFig2))
                .code == 0);
    auto csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"t", "phi_analytic", "phi_gillespie", "phi_se"});
    CHECK(csv.rows.size() == 10);
    CHECK(read_json(d.file("p.manifest.json"))["n_paths"] == 500);

    out = d.file("s.csv");
    REQUIRE(run(cat({"simulate", "--kind", "fpt-reset", "--r", "0.5", "--paths", "40", "--out", out, "--threads", "1"}, kFig4))
                .code == 0);
    csv = read_csv(out);
    CHECK(csv.header == std::vector<std::string>{"run", "hit_time", "n_entries_used", "generation"});
    CHECK(csv.rows.size() == 40);

    out = d.file("e.csv");
    REQUIRE(run(cat({"simulate", "--kind", "ensemble", "--t", "1", "--lambda-r", "3", "--lambda-m", "0.5", "--paths", "5", "--out", out},
                    kFig2))
                .code == 0);
    CHECK(read_csv(out).header == std::vector<std::string>{"ensemble", "x"});
    CHECK(run(cat({"simulate", "--kind", "ensemble", "--paths", "5", "--out", out}, kFig2)).code == kExitInvalid);
}

TEST_CASE("replay reproduces a seeded run") {
    TempDir d;
    const auto out = d.file("orig.csv");
    REQUIRE(run(cat({"fpt", "--out", out, "--t-max", "40", "--points", "20", "--mc", "--paths", "300", "--seed", "99"}, kFig4))
                .code == 0);
    const auto again = d.file("again.csv");
    REQUIRE(run({"replay", "--manifest", d.file("orig.manifest.json"), "--out", again}).code == 0);
    CHECK(slurp(out) == slurp(again));
    CHECK(run({"replay", "--manifest", d.file("missing.json")}).code == kExitInvalid);
    std::ofstream(d.file("bad.json")) << "{\"argv\": 3}";
    CHECK(run({"replay", "--manifest", d.file("bad.json")}).code == kExitInvalid);
}

}
