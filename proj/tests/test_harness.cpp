#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "cvahedge/harness.hpp"

using namespace cvahedge;
namespace fs = std::filesystem;

namespace {

std::string scenario_path(const char* name) { return std::string(CVAHEDGE_SOURCE_DIR) + "/scenarios/" + name; }

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& tag)
{
    const fs::path d = fs::temp_directory_path() / ("cvahedge_harness_" + tag);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int cli(const std::string& args)
{
    const std::string cmd = std::string(CVAHEDGE_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Scenario small(RunMode mode, const fs::path& out)
{
    Scenario s = load_scenario(scenario_path("cds_n1.json"));
    s.sim.n_paths = 400;
    s.estimator.n_paths = 400;
    s.tables.grid_points = 5;
    s.tables.paths = 16;
    s.hedge.min_paths = 100;
    s.report_paths = 3;
    s.mode = mode;
    s.output_dir = out.string();
    s.finalize();
    return s;
}

}  // namespace

TEST_CASE("CLI exit codes")
{
    const fs::path out = scratch("exit");
    CHECK(cli("--help") == 0);
    CHECK(cli("") == exit_config);
    CHECK(cli("--scenario /nonexistent.json") == exit_config);
    CHECK(cli("--scenario " + scenario_path("cds_n1.json") + " --mode nope --out " + out.string()) == exit_config);
    CHECK(cli("--scenario " + scenario_path("cds_n1.json") + " --threads 0 --out " + out.string()) == exit_config);
    CHECK(cli("--scenario " + std::string(CVAHEDGE_SOURCE_DIR) + "/tests/data/zero_paths.json --out " + out.string()) ==
          exit_config);
    CHECK(cli("--scenario " + scenario_path("cds_n1.json") + " --mode simulate --out " + out.string()) == exit_ok);
    CHECK(fs::exists(out / "defaults.csv"));
    CHECK(fs::exists(out / "summary.txt"));
}

TEST_CASE("verify passes on the single-name CDS scenario")
{
    Scenario s = load_scenario(scenario_path("cds_n1.json"));
    const fs::path out = scratch("verify");
    s.output_dir = out.string();
    s.mode = RunMode::verify;
    s.finalize();
    std::ostringstream log;
    CHECK(run(s, log) == exit_ok);
    const std::string report = slurp(out / "verify_report.txt");
    CHECK(report.find("FAIL") == std::string::npos);
    CHECK(report.find("PASS") != std::string::npos);
}

TEST_CASE("zero portfolio hedge writes zero columns")
{
    Scenario s = load_scenario(scenario_path("zero_portfolio.json"));
    const fs::path out = scratch("zero");
    s.output_dir = out.string();
    s.finalize();
    std::ostringstream log;
    REQUIRE(run(s, log) == exit_ok);
    std::ifstream in(out / "hedge.csv");
    std::string line;
    std::getline(in, line);
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    REQUIRE(header.size() > 2);
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        std::string cell;
        for (std::size_t c = 0; std::getline(ss, cell, ','); ++c) {
            if (header[c] == "time" || header[c] == "phi") continue;
            CAPTURE(header[c]);
            CHECK(std::stod(cell) == 0.0);
        }
        ++rows;
    }
    CHECK(rows > 0);
}

TEST_CASE("outputs are byte-identical across thread counts")
{
    for (RunMode mode : {RunMode::simulate, RunMode::price, RunMode::cva, RunMode::hedge}) {
        CAPTURE(to_string(mode));
        std::vector<std::map<std::string, std::string>> seen;
        for (std::size_t threads : {1u, 2u, 8u}) {
            const fs::path out = scratch(to_string(mode) + std::to_string(threads));
            Scenario s = small(mode, out);
            s.sim.threads = threads;
            s.finalize();
            std::ostringstream log;
            REQUIRE(run(s, log) == exit_ok);
            std::map<std::string, std::string> files;
            for (const auto& e : fs::directory_iterator(out)) files[e.path().filename().string()] = slurp(e.path());
            seen.push_back(files);
        }
        CHECK(!seen[0].empty());
        CHECK(seen[0] == seen[1]);
        CHECK(seen[0] == seen[2]);
    }
}

TEST_CASE("seed changes the output")
{
    const fs::path a = scratch("seed_a"), b = scratch("seed_b");
    Scenario s = small(RunMode::simulate, a);
    std::ostringstream log;
    REQUIRE(run(s, log) == exit_ok);
    s.output_dir = b.string();
    s.sim.seed += 1;
    s.finalize();
    REQUIRE(run(s, log) == exit_ok);
    CHECK(slurp(a / "defaults.csv") != slurp(b / "defaults.csv"));
}
