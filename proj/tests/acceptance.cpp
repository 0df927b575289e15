// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cvahedge/closed_forms.hpp"
#include "cvahedge/harness.hpp"
#include "cvahedge/hedging.hpp"
#include "cvahedge/parallel.hpp"
#include "cvahedge/scenario.hpp"
#include "cvahedge/value_tables.hpp"

using namespace cvahedge;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string scenario_path(const char* name) { return std::string(CVAHEDGE_SOURCE_DIR) + "/scenarios/" + name; }

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

ModelParams constant_model(const std::vector<double>& x)
{
    ModelParams p;
    p.n_names = x.size();
    p.kappa.assign(x.size(), 0.0);
    p.nu.assign(x.size(), 0.0);
    p.sigma = {0.0};
    p.contagion.assign(x.size(), std::vector<double>(x.size(), 0.0));
    p.initial_intensity = x;
    return p;
}

EstimatorConfig estimator(double T, std::size_t paths, std::uint64_t seed, double dt = 0.02)
{
    EstimatorConfig c;
    c.maturity = T;
    c.dt = dt;
    c.n_paths = paths;
    c.seed = seed;
    return c;
}

std::vector<MarketPath> simulate_all(const ModelParams& p, const SimConfig& sim)
{
    std::vector<MarketPath> out(sim.n_paths);
    parallel_for(sim.n_paths, sim.threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            RandomStream rng(sim.seed, stream_id(StreamDomain::market, i));
            out[i] = simulate_market(p, sim, rng);
        }
    });
    return out;
}

Outcome martingale_compensators()
{
    const Scenario s = load_scenario(scenario_path("contagion_n3.json"));
    Outcome o;
    for (bool f : feller_check(s.model)) o.pass = o.pass && f;
    if (!o.pass) return {false, "scenario violates the Feller condition"};
    SimConfig sim = s.sim;
    sim.n_paths = 200000;
    const auto t0 = Clock::now();
    std::vector<RunningStats> m(s.model.n_names);
    // streamed to keep memory flat
    MarketPath path;
    for (std::size_t i = 0; i < sim.n_paths; ++i) {
        RandomStream rng(sim.seed, stream_id(StreamDomain::market, i));
        simulate_market(s.model, sim, 0.0, s.model.initial_intensity, DefaultState(s.model.n_names), rng, path);
        const std::size_t last = path.size() - 1;
        for (std::size_t j = 0; j < s.model.n_names; ++j)
            m[j].add((path.defaulted_by(j, sim.horizon) ? 1.0 : 0.0) - path.compensator(last, j));
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::ostringstream d;
    for (std::size_t j = 0; j < m.size(); ++j) {
        const Estimate e = m[j].estimate();
        o.pass = o.pass && agree(e, 0.0);
        d << "M" << j << "=" << fmt("%.2e (se %.1e) ", e.value, e.std_error);
    }
    o.pass = o.pass && secs < 60.0;
    d << fmt("time %.1fs", secs);
    o.detail = d.str();
    return o;
}

Outcome exponential_time()
{
    const ModelParams p = constant_model({0.5});
    SimConfig sim;
    sim.horizon = 2.0;
    sim.dt = 0.05;
    sim.n_paths = 100000;
    sim.seed = 11;
    RunningStats d;
    MarketPath path;
    for (std::size_t i = 0; i < sim.n_paths; ++i) {
        RandomStream rng(sim.seed, stream_id(StreamDomain::market, i));
        simulate_market(p, sim, 0.0, p.initial_intensity, DefaultState(1), rng, path);
        d.add(path.defaulted_by(0, 2.0) ? 1.0 : 0.0);
    }
    const double exact = 1.0 - std::exp(-1.0);
    const Estimate e = d.estimate();
    return {agree(e, exact), fmt("p=%.5f exact=%.5f se=%.1e", e.value, exact, e.std_error)};
}

Outcome exact_states()
{
    ModelParams p2;
    p2.n_names = 2;
    p2.kappa = {0.03, 0.03};
    p2.nu = {0.4, 0.4};
    p2.sigma = {0.1};
    p2.contagion = {{0.0, 0.1}, {0.1, 0.0}};
    p2.initial_intensity = {0.05, 0.07};
    ModelParams p3 = p2;
    p3.n_names = 3;
    p3.kappa.push_back(0.03);
    p3.nu.push_back(0.4);
    p3.contagion = {{0.0, 0.1, 0.1}, {0.1, 0.0, 0.1}, {0.1, 0.1, 0.0}};
    p3.initial_intensity.push_back(0.06);
    const Portfolio cds =
        make_portfolio({make_cds(2, 0, 0.02, LossMap::flat(0.6))}, {1.0}, 0.03, LossMap::flat(0.6));
    const Portfolio bond =
        make_portfolio({make_bond(2, 0, 0.04, LossMap::flat(0.6))}, {1.0}, 0.03, LossMap::flat(0.6));
    const Portfolio ftd = make_portfolio(
        {make_first_to_default(3, {0, 1}, 0.05, {LossMap::flat(0.6), LossMap::flat(0.5)})}, {1.0}, 0.03,
        LossMap::flat(0.6));
    const auto cfg = estimator(1.0, 500, 3, 0.05);
    OracleConfig oc;
    oc.n_paths = 200;
    const std::vector<double> x2{0.05, 0.07}, x3{0.05, 0.06, 0.07};
    std::size_t checks = 0, bad = 0;
    auto expect = [&](double got, double want) {
        ++checks;
        if (got != want) ++bad;
    };
    const CauchySpec cds_spec{{1, 1, 1}, cds.claims[0]};
    const CauchySpec ftd_spec{{1, 1, 1}, ftd.claims[0]};
    const CauchySpec bond_spec{{1, 1, 1}, bond.claims[0]};
    for (double t : {0.0, 0.4}) {
        expect(estimate_F_direct(p2, cds_spec, t, x2, DefaultState(2, 0b11), cfg).value, 0.6);
        expect(estimate_F_recursive(p2, cds_spec, t, x2, DefaultState(2, 0b11), cfg).value, 0.6);
        expect(cds_oracle(p2, cds, OracleQuantity::claim, DefaultState(2, 0b11), t, x2, oc).value, 0.6);
        expect(estimate_F_direct(p2, bond_spec, t, x2, DefaultState(2, 0b11), cfg).value, 1.0 - 0.6);
        expect(estimate_F_recursive(p3, ftd_spec, t, x3, DefaultState(3, 0b111), cfg).value, 1.1);
        expect(estimate_F_direct(p3, ftd_spec, t, x3, DefaultState(3, 0b111), cfg).value, 1.1);
        expect(ftd_oracle(p3, ftd, OracleQuantity::claim, DefaultState(3, 0b111), t, x3, oc).value, 1.1);
        for (std::uint32_t z : {0b10u, 0b11u}) {
            expect(estimate_g(p2, cds, t, x2, DefaultState(2, z), cfg).value, 0.0);
            expect(cds_oracle(p2, cds, OracleQuantity::g, DefaultState(2, z), t, x2, oc).value, 0.0);
            expect(estimate_g(p2, bond, t, x2, DefaultState(2, z), cfg).value, 0.0);
        }
        for (std::uint32_t z : {0b100u, 0b101u, 0b110u, 0b111u}) {
            expect(estimate_g(p3, ftd, t, x3, DefaultState(3, z), cfg).value, 0.0);
            expect(ftd_oracle(p3, ftd, OracleQuantity::g, DefaultState(3, z), t, x3, oc).value, 0.0);
        }
        // at maturity every value is its terminal payoff
        for (std::uint32_t z = 0; z < 4; ++z)
            expect(estimate_F_recursive(p2, cds_spec, 1.0, x2, DefaultState(2, z), cfg).value,
                   cds_spec.terminal(DefaultState(2, z)));
    }
    return {bad == 0, std::to_string(checks - bad) + "/" + std::to_string(checks) + " exact"};
}

Outcome deterministic_oracle()
{
    const double lam = 0.3, T = 1.0, L = 0.6, eps = 0.02;
    const ModelParams p = constant_model({lam, 0.1});
    const Portfolio book =
        make_portfolio({make_cds(2, 0, eps, LossMap::flat(L))}, {1.0}, 0.03, LossMap::flat(0.6));
    const CauchySpec s{{1, 1, 1}, book.claims[0]};
    const double exact = (L - eps / lam) * (1.0 - std::exp(-lam * T));
    OracleConfig oc;
    oc.maturity = T;
    const double q = cds_oracle(p, book, OracleQuantity::claim, DefaultState(2), 0.0, p.initial_intensity, oc).value;
    const auto cfg = estimator(T, 10000, 5, 0.05);
    const Estimate d = estimate_F_direct(p, s, 0.0, p.initial_intensity, DefaultState(2), cfg);
    const Estimate r = estimate_F_recursive(p, s, 0.0, p.initial_intensity, DefaultState(2), cfg);
    const bool ok = std::abs(q - exact) <= 1e-10 && agree(d, q) && agree(r, q);
    std::ostringstream o;
    o << fmt("quad=%.12f |quad-exact|=%.1e ", q, std::abs(q - exact))
      << fmt("direct=%.5f(%.1e) ", d.value, d.std_error) << fmt("recursive=%.5f(%.1e)", r.value, r.std_error);
    return {ok, o.str()};
}

Outcome estimator_equivalence()
{
    ModelParams p2;
    p2.n_names = 2;
    p2.kappa = {0.02, 0.03};
    p2.nu = {0.4, 0.4};
    p2.sigma = {0.0, 0.0};
    p2.vol_override = {{0.1, 0.0}, {0.03, 0.1}};
    p2.contagion = {{0.0, 0.1}, {0.05, 0.0}};
    p2.initial_intensity = {0.05, 0.08};
    ModelParams p3;
    p3.n_names = 3;
    p3.kappa = {0.02, 0.03, 0.03};
    p3.nu = {0.4, 0.4, 0.5};
    p3.sigma = {0.05};
    p3.contagion = {{0.0, 0.1, 0.1}, {0.1, 0.0, 0.05}, {0.05, 0.1, 0.0}};
    p3.initial_intensity = {0.05, 0.06, 0.08};
    struct Case {
        const char* name;
        const ModelParams* p;
        ClaimSpec claim;
    };
    const std::vector<Case> cases{
        {"cds", &p2, make_cds(2, 0, 0.02, LossMap::flat(0.6))},
        {"bond", &p2, make_bond(2, 0, 0.04, LossMap::flat(0.6))},
        {"ftd", &p3, make_first_to_default(3, {0, 1}, 0.05, {LossMap::flat(0.6), LossMap::flat(0.5)})},
    };
    std::size_t checks = 0, bad = 0;
    double worst = 0.0;
    std::uint64_t seed = 20240611;
    std::size_t stochastic = 0;
    for (const Case& c : cases) {
        const CauchySpec s{{1, 1, 1}, c.claim};
        const std::size_t n = c.p->n_names;
        for (double t : {0.0, 0.4, 0.8}) {
            for (double scale : {0.5, 1.0, 2.0}) {
                std::vector<double> x = c.p->initial_intensity;
                for (double& v : x) v *= scale;
                for (std::uint32_t z = 0; z < (1u << n); ++z) {
                    const auto cfg = estimator(1.0, 4000, ++seed, 0.05);
                    const Estimate d = estimate_F_direct(*c.p, s, t, x, DefaultState(n, z), cfg);
                    const Estimate r = estimate_F_recursive(*c.p, s, t, x, DefaultState(n, z), cfg);
                    ++checks;
                    stochastic += d.std_error > 0 || r.std_error > 0;
                    const double se = std::hypot(d.std_error, r.std_error);
                    if (se > 1e-9) worst = std::max(worst, std::abs(d.value - r.value) / se);
                    if (!agree(d, r)) {
                        ++bad;
                        std::fprintf(stderr, "  %s t=%g scale=%g z=%u direct=%.15g(%.3g) recursive=%.15g(%.3g)\n", c.name, t, scale, z, d.value, d.std_error, r.value, r.std_error);
                    }
                }
            }
        }
    }
    return {bad == 0, std::to_string(checks - bad) + "/" + std::to_string(checks) + " agree (" + std::to_string(stochastic) + " stochastic)" +
                           fmt(", worst z=%.2f", worst)};
}

Outcome alpha_linearity()
{
    RandomStream gen(77, 0);
    ModelParams p;
    p.n_names = 3;
    p.kappa = {0.03, 0.04, 0.05};
    p.nu = {0.5, 0.6, 0.4};
    p.sigma = {0.0, 0.0};
    p.vol_override = {{0.08, 0.0}, {0.04, 0.06}, {0.0, 0.1}};
    p.contagion = {{0.0, 0.3, 0.2}, {0.25, 0.0, 0.3}, {0.2, 0.15, 0.0}};
    p.initial_intensity = {0.2, 0.25, 0.3};
    const ClaimSpec claim = make_first_to_default(3, {0, 1}, 0.05, {LossMap::flat(0.6), LossMap::flat(0.5)});
    std::size_t bad = 0;
    double worst = 0.0;
    for (int k = 0; k < 5; ++k) {
        const double t = 0.8 * gen.uniform();
        std::vector<double> x(3);
        for (double& v : x) v = 0.05 + 0.4 * gen.uniform();
        const DefaultState z(3, static_cast<std::uint32_t>(gen.uniform() * 4));
        auto est = [&](std::array<double, 3> a, std::uint64_t seed) {
            return estimate_F_recursive(p, CauchySpec{a, claim}, t, x, z, estimator(1.0, 8000, seed, 0.05));
        };
        const Estimate a = est({1, 0, 0}, 1000 + k), b = est({0, 1, 1}, 2000 + k), c = est({1, 1, 1}, 3000 + k);
        const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error + c.std_error * c.std_error);
        const double gap = std::abs(a.value + b.value - c.value);
        if (gap > 3.0 * se + 1e-12) ++bad;
        if (se > 1e-9) worst = std::max(worst, gap / se);
    }
    return {bad == 0, fmt("5 states, worst z=%.2f", worst)};
}

Outcome gkw_suite()
{
    Scenario s = load_scenario(scenario_path("cds_n1.json"));
    s.finalize();
    const std::size_t n_paths = 50000;
    const Portfolio book = s.portfolio.build(s.model.n_names);
    const ValueTables tables(s.model, book, s.estimator, s.tables);
    HedgeConfig hc = s.hedge;
    hc.keep_rows = 0;
    const auto reports = hedge_ensemble(s.model, book, tables, s.estimator, hc, n_paths);
    const GkwSummary g = gkw_diagnostics(reports, tables.times(), hc);
    double worst_cost = 0.0, worst_cov = 0.0;
    for (std::size_t b = 0; b < g.mean_cost.size(); ++b) {
        for (const Estimate& e : {g.mean_cost[b], g.cumulative_cost[b]})
            if (e.std_error > 0) worst_cost = std::max(worst_cost, std::abs(e.value) / e.std_error);
        if (g.covariance[b].std_error > 0)
            worst_cov = std::max(worst_cov, std::abs(g.covariance[b].value) / g.covariance[b].std_error);
    }
    std::ostringstream d;
    d << "(a) " << (g.zero_achieving() ? "ok" : "no") << " (b) " << (g.cost_martingale() ? "ok" : "no")
      << fmt(" z=%.2f", worst_cost) << " (c) " << (g.orthogonal() ? "ok" : "no") << fmt(" z=%.2f", worst_cov)
      << " (d) " << (g.risk_dominant() ? "ok" : "no") << " paths=" << n_paths;
    return {g.zero_achieving() && g.cost_martingale() && g.orthogonal() && g.risk_dominant(), d.str()};
}

Outcome gradient_quality()
{
    const double lam = 0.2, T = 1.0, L = 0.6, eps = 0.02;
    const ModelParams p = constant_model({lam, 0.1});
    const Portfolio book =
        make_portfolio({make_cds(2, 0, eps, LossMap::flat(L))}, {1.0}, 0.03, LossMap::flat(0.6));
    OracleConfig oc;
    oc.maturity = T;
    const PointEstimator f = [&](double t, std::span<const double> x, DefaultState z, const EstimatorConfig&) {
        return cds_oracle(p, book, OracleQuantity::claim, z, t, x, oc);
    };
    const double exact = eps / (lam * lam) * (1 - std::exp(-lam * T)) + (L - eps / lam) * T * std::exp(-lam * T);
    auto cfg = estimator(T, 1, 1);
    cfg.h_rel = 0.01;
    const double e1 = std::abs(gradient_x(f, 0.0, p.initial_intensity, DefaultState(2), cfg)[0] - exact);
    cfg.h_rel = 0.005;
    const double e2 = std::abs(gradient_x(f, 0.0, p.initial_intensity, DefaultState(2), cfg)[0] - exact);
    const double rel = e1 / std::abs(exact), ratio = e1 / e2;
    return {rel < 1e-3 && std::abs(ratio - 4.0) < 0.4, fmt("rel err %.1e, halving ratio %.3f", rel, ratio)};
}

Outcome moment_sanity()
{
    const Scenario s = load_scenario(scenario_path("contagion_n3.json"));
    auto mean_at = [&](std::size_t n, std::uint64_t seed) {
        SimConfig sim = s.sim;
        sim.n_paths = n;
        sim.seed = seed;
        RunningStats q;
        MarketPath path;
        for (std::size_t i = 0; i < n; ++i) {
            RandomStream rng(seed, stream_id(StreamDomain::market, i));
            simulate_market(s.model, sim, 0.0, s.model.initial_intensity, DefaultState(s.model.n_names), rng, path);
            q.add(squared_intensity_integral(path));
        }
        return q.estimate();
    };
    const Estimate a = mean_at(10000, 41), b = mean_at(100000, 42);
    const bool finite = std::isfinite(a.value) && std::isfinite(b.value);
    const double rel = std::abs(a.value - b.value) / std::abs(b.value);
    return {finite && rel < 0.2, fmt("1e4: %.5f  1e5: %.5f  rel diff %.2e", a.value, b.value, rel)};
}

std::map<std::string, std::string> read_dir(const fs::path& d)
{
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(d)) {
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        files[e.path().filename().string()] = s.str();
    }
    return files;
}

Outcome reproducibility()
{
    const fs::path root = fs::temp_directory_path() / "cvahedge_acceptance";
    std::size_t compared = 0;
    bool same = true;
    for (RunMode mode : {RunMode::simulate, RunMode::price, RunMode::cva, RunMode::hedge, RunMode::verify}) {
        std::vector<std::map<std::string, std::string>> runs;
        for (std::size_t threads : {1u, 2u, 8u}) {
            Scenario s = load_scenario(scenario_path("cds_n1.json"));
            s.mode = mode;
            if (mode == RunMode::hedge) {
                s.sim.n_paths = 2000;
                s.hedge.min_paths = 1000;
            }
            if (mode == RunMode::simulate || mode == RunMode::cva) s.sim.n_paths = 5000;
            s.sim.threads = threads;
            const fs::path out = root / (to_string(mode) + "_" + std::to_string(threads));
            fs::remove_all(out);
            s.output_dir = out.string();
            s.finalize();
            std::ostringstream log;
            if (run(s, log) != exit_ok) return {false, to_string(mode) + " run failed: " + log.str()};
            runs.push_back(read_dir(out));
        }
        same = same && !runs[0].empty() && runs[0] == runs[1] && runs[0] == runs[2];
        compared += runs[0].size();
    }
    return {same, std::to_string(compared) + " files x 3 worker counts " + (same ? "identical" : "differ")};
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"martingale compensators", martingale_compensators},
        {"exponential default time", exponential_time},
        {"exact states", exact_states},
        {"deterministic-intensity oracle", deterministic_oracle},
        {"direct vs recursive", estimator_equivalence},
        {"alpha linearity", alpha_linearity},
        {"GKW hedging suite", gkw_suite},
        {"gradient quality", gradient_quality},
        {"moment sanity", moment_sanity},
        {"reproducibility", reproducibility},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
        std::printf("%s %2zu %-32s %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
