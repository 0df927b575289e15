#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cvahedge/harness.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"cvahedge: interacting-intensity credit Monte-Carlo, CVA and GKW hedging"};
    std::string scenario_path, mode, out;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    app.add_option("--scenario", scenario_path, "scenario file (JSON)")->envname("CVAHEDGE_SCENARIO")->required();
    app.add_option("--mode", mode, "simulate | price | cva | hedge | verify")->envname("CVAHEDGE_MODE");
    auto* seed_opt = app.add_option("--seed", seed, "master seed")->envname("CVAHEDGE_SEED");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads")->envname("CVAHEDGE_THREADS");
    app.add_option("--out", out, "output directory")->envname("CVAHEDGE_OUT");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cvahedge::exit_config;
    }

    cvahedge::Scenario s;
    try {
        s = cvahedge::load_scenario(scenario_path);
        if (!mode.empty()) s.mode = cvahedge::mode_from_string(mode);
        if (*seed_opt) s.sim.seed = seed;
        if (*threads_opt) {
            if (threads == 0) throw cvahedge::ConfigError("--threads must be positive");
            s.sim.threads = threads;
        }
        if (!out.empty()) s.output_dir = out;
        s.finalize();
    } catch (const cvahedge::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return cvahedge::exit_config;
    }
    return cvahedge::run(s, std::cerr);
}
