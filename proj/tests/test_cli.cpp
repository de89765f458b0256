#include "catch_amalgamated.hpp"

#include "stmeta/io.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using stmeta::Json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("stmeta_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run(const std::string& args, const fs::path& dir) {
    const std::string cmd = std::string(STMETA_CLI_PATH) + " " + args + " 2> " + (dir / "stderr.txt").string() +
                            " > " + (dir / "stdout.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

}  // namespace

TEST_CASE("flat input keeps the output on its rail", "[cli]") {
    const fs::path d = scratch("flat");
    REQUIRE(run("simulate --out " + (d / "out").string(), d) == 0);
    const std::string csv = slurp(d / "out" / "trajectory.csv");
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,v_in,v_out,region\r");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(line.find(",0,1,Saturation_Pos\r") != std::string::npos);
    }
    CHECK(rows == 1001);
    CHECK(fs::exists(d / "out" / "effective_config.json"));
    CHECK(fs::exists(d / "out" / "trajectory_events.csv"));
}

TEST_CASE("effective config reproduces the run byte for byte", "[cli]") {
    const fs::path d = scratch("replay");
    const std::string a = (d / "a").string(), b = (d / "b").string();
    REQUIRE(run("simulate --set scenario.v_out0=0.2 --set run.t1=5e-9 --format csv --format json --out " + a, d) == 0);
    REQUIRE(run("simulate --config " + a + "/effective_config.json --out " + b, d) == 0);
    CHECK(slurp(d / "a" / "trajectory.csv") == slurp(d / "b" / "trajectory.csv"));
    CHECK(slurp(d / "a" / "trajectory_events.json") == slurp(d / "b" / "trajectory_events.json"));
}

TEST_CASE("configuration errors exit with code 1", "[cli]") {
    const fs::path d = scratch("bad");
    CHECK(run("simulate --set model.gain=3 --out " + (d / "o").string(), d) == 1);
    const Json err = Json::parse(slurp(d / "stderr.txt"));
    CHECK(err["error"] == "config");
    CHECK(err["exit_code"] == 1);
    CHECK(run("simulate --set model.feedback_k=0.0001 --out " + (d / "o").string(), d) == 1);
    CHECK(run("pin --set model.kind=cmos --out " + (d / "o").string(), d) == 1);
    CHECK(run("nonsense", d) == 1);
}

TEST_CASE("infeasible control exits with code 2 and lists intervals", "[cli]") {
    const fs::path d = scratch("infeasible");
    CHECK(run("control --set scenario.desired.segments.0.amplitude=0.9 --out " + (d / "o").string(), d) == 2);
    const Json err = Json::parse(slurp(d / "stderr.txt"));
    CHECK(err["error"] == "infeasible");
    REQUIRE(err.contains("intervals"));
    CHECK_FALSE(err["intervals"].empty());
    for (const auto& iv : err["intervals"]) CHECK(iv["t_end"].get<double>() > iv["t_begin"].get<double>());
}

TEST_CASE("every subcommand writes its outputs", "[cli]") {
    const fs::path d = scratch("all");
    const std::string o = (d / "o").string();
    REQUIRE(run("phase-map --format csv --format json --format svg --set grid.n_in=20 --set grid.n_out=20 --out " + o, d) == 0);
    CHECK(fs::exists(d / "o" / "phase_map.csv"));
    CHECK(fs::exists(d / "o" / "gamma2.csv"));
    CHECK(fs::exists(d / "o" / "phase_map.svg"));
    REQUIRE(run("delay-sweep --format json --out " + o, d) == 0);
    const Json sweep = Json::parse(slurp(d / "o" / "sweep.json"));
    CHECK(sweep["rows"].size() == 7);
    REQUIRE(run("control --set control.vin_rate_cap=1e8 --set run.t1=1e-8 --out " + o, d) == 0);
    const Json plan = Json::parse(slurp(d / "o" / "plan.json"));
    CHECK(plan["feasibility"]["feasible"] == true);
    CHECK(plan["tracking"]["max_error"].get<double>() < 1e-6);
    REQUIRE(run("pin --set pin.level=0.3 --format json --out " + o, d) == 0);
    CHECK(Json::parse(slurp(d / "o" / "pin.json"))["resolved"] == "Saturation_Neg");
    REQUIRE(run("fit-tau --out " + o, d) == 0);
    const Json fit = Json::parse(slurp(d / "o" / "fit.json"));
    CHECK(fit["tau_fit"].get<double>() == Catch::Approx(fit["tau2"].get<double>()).epsilon(0.02));
}
