#include "doctest.h"

#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
    int code = -1;
    std::string err;
};

fs::path workdir() {
    static const fs::path dir = [] {
        fs::path d(BSP_TEST_WORKDIR);
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Run bsp(const std::string& args, const std::string& env = "") {
    const fs::path err = workdir() / "stderr.txt";
    const std::string cmd = "cd '" + workdir().string() + "' && " + env + " '" + BSP_CLI_PATH + "' " + args +
                            " > /dev/null 2> '" + err.string() + "'";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream(workdir() / p) << text;
}

json read_json(const fs::path& p) {
    return json::parse(slurp(workdir() / p));
}

std::vector<std::string> lines(const fs::path& p) {
    std::istringstream in(slurp(workdir() / p));
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) {
        out.push_back(line);
    }
    return out;
}

bool single_line(const std::string& text) {
    return !text.empty() && text.find('\n') == text.size() - 1;
}

// Simulated fixture shared by the data-driven commands.
void ensure_fixture() {
    static bool done = false;
    if (done) {
        return;
    }
    write("sim.json", R"({"simulate": {"n_years": 54, "first_year": 1957}})");
    REQUIRE(bsp("simulate --config sim.json --seed 4 --out fixture").code == 0);
    done = true;
}

} // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(bsp("basis --bogus").code == 2);
    CHECK(bsp("").code == 2);
    CHECK(bsp("frobnicate").code == 2);
    const Run r = bsp("fit --seed notanumber");
    CHECK(r.code == 2);
    CHECK(single_line(r.err));
}

TEST_CASE("validation failures exit with 1 and one line") {
    for (const std::string args : {"fit --gender x", "backtest --origins 2010..1990", "fit --config missing.json",
                                   "fit", "basis --horizons 0"}) {
        CAPTURE(args);
        const Run r = bsp(args + " --out val");
        CHECK(r.code == 1);
        CHECK(single_line(r.err));
    }
    write("unknown_key.json", R"({"fit": {"n_start": 3}})");
    const Run r = bsp("basis --config unknown_key.json --out val");
    CHECK(r.code == 1);
    CHECK(r.err.find("n_start") != std::string::npos);
    write("broken.json", "{not json");
    CHECK(bsp("basis --config broken.json --out val").code == 1);
}

TEST_CASE("basis writes the design matrix and a manifest") {
    REQUIRE(bsp("basis --out basis").code == 0);
    const auto rows = lines("basis/basis.csv");
    REQUIRE(rows.size() == 103);
    CHECK(rows[0].rfind("# manifest: manifest.json", 0) == 0);
    CHECK(rows[1].rfind("age,g1,g2,", 0) == 0);
    CHECK(rows[1].find(",g20") != std::string::npos);
    CHECK(rows[2] == "0,1,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0");
    CHECK(lines("basis/peak_ages.csv").size() == 22);
    const json m = read_json("basis/manifest.json");
    CHECK(m["command"] == "basis");
    CHECK(m["seed"] == 1);
    CHECK(m["version"].is_string());
    CHECK(m["config"]["basis"]["interior_knots"].size() == 16);
    CHECK(m["outputs"].size() == 2);
    CHECK(m["outputs"][0]["sha256"].get<std::string>().size() == 64);
}

TEST_CASE("simulate is byte-deterministic in the seed") {
    REQUIRE(bsp("simulate --seed 8 --out simA").code == 0);
    REQUIRE(bsp("simulate --seed 8 --out simB", "BSP_THREADS=3").code == 0);
    REQUIRE(bsp("simulate --seed 9 --out simC").code == 0);
    for (const char* f : {"surface.csv", "states.csv"}) {
        CHECK(slurp(workdir() / "simA" / f) == slurp(workdir() / "simB" / f));
        CHECK(slurp(workdir() / "simA" / f) != slurp(workdir() / "simC" / f));
    }
    const auto rows = lines("simA/surface.csv");
    CHECK(rows[1] == "year,age,deaths,exposure,log_rate,observed_flag");
    CHECK(rows.size() == 2 + 80 * 101);
    CHECK(lines("simA/states.csv").size() == 2 + 80 * 20);
}

TEST_CASE("fit records the seed from the flag and input checksums") {
    ensure_fixture();
    write("fit.json", R"({"seed": 5, "data": {"inputs": [{"country": "SIM", "surface_csv": "fixture/surface.csv"}]},
                         "fit": {"n_starts": 2, "max_iters": 120}})");
    REQUIRE(bsp("fit --config fit.json --seed 9 --out fit").code == 0);
    const json f = read_json("fit/fit_SIM-female.json");
    CHECK(std::isfinite(f["best_loglik"].get<double>()));
    CHECK(f["trace"].size() == 2);
    CHECK(f["manifest"] == "manifest.json");
    CHECK(f["seed"] == 9);
    const json m = read_json("fit/manifest.json");
    CHECK(m["seed"] == 9);
    CHECK(m["config"]["fit"]["n_starts"] == 2);
    const json sim = read_json("fixture/manifest.json");
    bool found = false;
    for (const auto& in : m["inputs"]) {
        if (in["path"] == "fixture/surface.csv") {
            found = true;
            CHECK(in["sha256"] == sim["outputs"][0]["sha256"]);
        }
    }
    CHECK(found);
}

TEST_CASE("forecast writes horizons times ages rows") {
    ensure_fixture();
    write("fc.json", R"({"data": {"inputs": [{"country": "SIM", "surface_csv": "fixture/surface.csv"}]},
                        "params": {"sigma2_obs": 0.0025, "sigma2_beta": 0.01, "sigma2_a": 0.06, "lambda": 0.02},
                        "forecast": {"draws": 20, "variance_fit": {"n_starts": 2, "max_iters": 100}}})");
    REQUIRE(bsp("forecast --config fc.json --horizons 10 --out fc").code == 0);
    const auto rows = lines("fc/forecast_SIM-female.csv");
    REQUIRE(rows.size() == 2 + 10 * 101);
    CHECK(rows[1] == "year,age,point,lo95,hi95");
    CHECK(rows[2].rfind("2011,0,", 0) == 0);
    CHECK(rows.back().rfind("2020,100,", 0) == 0);
    CHECK(lines("fc/forecast_coefficients_SIM-female.csv").size() == 2 + 10 * 20);
    const json d = read_json("fc/drift_SIM-female.json");
    CHECK(d["window_first_year"] == 1986);

    REQUIRE(bsp("smooth --config fc.json --out sm --dump-matrices").code == 0);
    const auto sm = lines("sm/smooth_SIM-female.csv");
    CHECK(sm[1] == "year,spline,quantity,mean,lo95,hi95");
    CHECK(sm.size() == 2 + 54 * 3 * 2);
    CHECK(fs::exists(workdir() / "sm/matrices_SIM-female/T_first.csv"));

    write("short.json", R"({"data": {"inputs": [{"country": "SIM", "surface_csv": "fixture/surface.csv"}],
                                      "years": [1980, 2010]},
                           "params": {"sigma2_obs": 0.0025, "sigma2_beta": 0.01, "sigma2_a": 0.06, "lambda": 0.02}})");
    const Run r = bsp("forecast --config short.json --out short");
    CHECK(r.code == 1);
    CHECK(r.err.find("50") != std::string::npos);
}

TEST_CASE("backtest output does not depend on the thread count") {
    ensure_fixture();
    write("bt.json", R"({"data": {"inputs": [{"country": "SIM", "surface_csv": "fixture/surface.csv"}]},
                        "fit": {"n_starts": 1, "max_iters": 60},
                        "forecast": {"draws": 10, "variance_fit": {"n_starts": 1, "max_iters": 60}},
                        "backtest": {"origins": "2007..2008", "horizons": 3}})");
    REQUIRE(bsp("backtest --config bt.json --out bt1", "BSP_THREADS=1").code == 0);
    REQUIRE(bsp("backtest --config bt.json --out bt2", "BSP_THREADS=4").code == 0);
    CHECK(slurp(workdir() / "bt1/backtest.json") == slurp(workdir() / "bt2/backtest.json"));
    CHECK(slurp(workdir() / "bt1/backtest.csv") == slurp(workdir() / "bt2/backtest.csv"));
    json m1 = read_json("bt1/manifest.json"), m2 = read_json("bt2/manifest.json");
    m1["config"].erase("out");
    m2["config"].erase("out");
    CHECK(m1 == m2);
    const json b = read_json("bt1/backtest.json");
    CHECK(b["horizons"][0]["cells"] == 2 * 101);
    // 2008 + 3 runs past the last year
    CHECK(b["skips"].size() == 1);
    CHECK(lines("bt1/backtest.csv")[1] == "horizon,cells,median_abs_error,q1,q3,coverage95");

    REQUIRE(bsp("backtest --config bt.json --origins 2000..2001 --out bt3").code == 0);
    CHECK(read_json("bt3/manifest.json")["config"]["backtest"]["origins"] == "2000..2001");
}

TEST_CASE("check-prop1 reports one row per exposure") {
    REQUIRE(bsp("check-prop1 --out prop").code == 0);
    const auto rows = lines("prop/prop1.csv");
    REQUIRE(rows.size() == 5);
    CHECK(rows[1] == "exposure,ks_distance");
}
