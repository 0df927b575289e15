#include "cvahedge/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "cvahedge/closed_forms.hpp"
#include "cvahedge/csv.hpp"
#include "cvahedge/cva.hpp"
#include "cvahedge/parallel.hpp"

namespace cvahedge {

namespace {

namespace fs = std::filesystem;

std::ofstream open_out(const Scenario& s, const std::string& name)
{
    fs::create_directories(s.output_dir);
    std::ofstream out(fs::path(s.output_dir) / name, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + (fs::path(s.output_dir) / name).string());
    return out;
}

std::string state_label(DefaultState z)
{
    std::string out;
    for (std::size_t i = 0; i < z.size(); ++i) out += z.defaulted(i) ? '1' : '0';
    return out;
}

std::vector<CauchySpec> specs_of(const Portfolio& p)
{
    std::vector<CauchySpec> out;
    for (const auto& c : p.claims) out.push_back(CauchySpec{{1.0, 1.0, 1.0}, c});
    out.push_back(CauchySpec{{1.0, 1.0, 1.0}, p.counterparty_cds});
    return out;
}

std::vector<MarketPath> market_paths(const Scenario& s, std::size_t n)
{
    std::vector<MarketPath> paths(n);
    parallel_for(n, s.sim.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RandomStream rng(s.sim.seed, stream_id(StreamDomain::market, i));
            paths[i] = simulate_market(s.model, s.sim, rng);
        }
    });
    return paths;
}

OracleConfig oracle_config(const Scenario& s)
{
    OracleConfig oc;
    oc.maturity = s.sim.horizon;
    oc.dt = s.estimator.dt;
    oc.n_paths = s.estimator.n_paths;
    oc.seed = s.sim.seed;
    oc.threads = s.sim.threads;
    return oc;
}

std::vector<double> base_grid(const Scenario& s)
{
    const std::size_t M = step_count(0.0, s.sim.horizon, s.sim.dt);
    std::vector<double> t(M + 1);
    for (std::size_t m = 0; m <= M; ++m) t[m] = s.sim.horizon * static_cast<double>(m) / static_cast<double>(M);
    return t;
}

// last point of the path at or before t
std::size_t point_at(const MarketPath& p, double t)
{
    auto it = std::upper_bound(p.times.begin(), p.times.end(), t + 1e-12);
    return static_cast<std::size_t>(std::distance(p.times.begin(), it)) - 1;
}

}  // namespace

void run_simulate(const Scenario& s)
{
    const auto paths = market_paths(s, s.sim.n_paths);
    const std::size_t n = s.model.n_names;
    {
        auto out = open_out(s, "defaults.csv");
        std::vector<std::string> head{"path"};
        for (std::size_t i = 0; i < n; ++i) head.push_back("tau_" + std::to_string(i));
        CsvWriter w(out, head);
        for (std::size_t p = 0; p < paths.size(); ++p) {
            w << p;
            for (std::size_t i = 0; i < n; ++i) w << paths[p].default_times[i];
            w.end_row();
        }
    }
    {
        auto out = open_out(s, "intensities.csv");
        std::vector<std::string> head{"path", "time", "state"};
        for (std::size_t i = 0; i < n; ++i) head.push_back("x_" + std::to_string(i));
        CsvWriter w(out, head);
        for (std::size_t p = 0; p < std::min(paths.size(), s.report_paths); ++p) {
            for (std::size_t m = 0; m < paths[p].size(); ++m) {
                w << p << paths[p].times[m] << state_label(paths[p].state(m));
                for (std::size_t i = 0; i < n; ++i) w << paths[p].x(m)[i];
                w.end_row();
            }
        }
    }
    auto out = open_out(s, "summary.txt");
    out << "mode=simulate\npaths=" << paths.size() << "\nseed=" << s.sim.seed << '\n';
    RunningStats moment;
    for (const auto& p : paths) moment.add(squared_intensity_integral(p));
    for (std::size_t i = 0; i < n; ++i) {
        RunningStats prob, mart;
        for (const auto& p : paths) {
            const double h = p.default_times[i] <= s.sim.horizon ? 1.0 : 0.0;
            prob.add(h);
            mart.add(h - p.compensator(p.size() - 1, i));
        }
        out << "default_probability_" << i << '=' << fmt(prob.mean()) << "\ndefault_probability_se_" << i << '='
            << fmt(prob.std_error()) << "\ncompensated_mean_" << i << '=' << fmt(mart.mean())
            << "\ncompensated_se_" << i << '=' << fmt(mart.std_error()) << '\n';
    }
    out << "squared_intensity_integral=" << fmt(moment.mean()) << "\nsquared_intensity_integral_se="
        << fmt(moment.std_error()) << '\n';
}

void run_price(const Scenario& s)
{
    const Portfolio portfolio = s.portfolio.build(s.model.n_names);
    const auto specs = specs_of(portfolio);
    const std::vector<double>& x0 = s.model.initial_intensity;
    const DefaultState z0(s.model.n_names);
    const bool oracle = oracle_supports(portfolio);
    auto out = open_out(s, "prices.csv");
    CsvWriter w(out, {"claim", "kind", "direct", "direct_se", "recursive", "recursive_se", "oracle", "oracle_se"});
    for (std::size_t c = 0; c < specs.size(); ++c) {
        const Estimate d = estimate_F_direct(s.model, specs[c], 0.0, x0, z0, s.estimator);
        const Estimate r = estimate_F_recursive(s.model, specs[c], 0.0, x0, z0, s.estimator);
        w << (c < portfolio.claims.size() ? std::to_string(c) : std::string("counterparty"))
          << to_string(specs[c].claim.kind) << d.value << d.std_error << r.value << r.std_error;
        if (oracle) {
            const auto q = c < portfolio.claims.size() ? OracleQuantity::claim : OracleQuantity::counterparty_cds;
            if (c < portfolio.claims.size() || portfolio.claims[0].kind == ClaimKind::cds) {
                const Estimate o = portfolio_oracle(s.model, portfolio, q, z0, 0.0, x0, oracle_config(s));
                w << o.value << o.std_error;
            } else {
                w << std::string() << std::string();
            }
        } else {
            w << std::string() << std::string();
        }
        w.end_row();
    }
}

void run_cva(const Scenario& s)
{
    const Portfolio portfolio = s.portfolio.build(s.model.n_names);
    const ValueTables tables(s.model, portfolio, s.estimator, s.tables);
    const auto paths = market_paths(s, s.sim.n_paths);
    const auto grid = base_grid(s);
    const std::size_t nc = portfolio.claims.size();
    const std::size_t cp = s.model.counterparty();

    // per path: prices, exposure and positive part at each grid time, zero
    // once the counterparty has defaulted
    const std::size_t width = nc + 2;
    std::vector<double> rows(paths.size() * grid.size() * width, 0.0);
    std::vector<double> paid(paths.size(), 0.0);
    parallel_for(paths.size(), s.sim.threads, [&](std::size_t begin, std::size_t end) {
        RandomStream unused(0, 0);
        for (std::size_t p = begin; p < end; ++p) {
            const MarketPath& path = paths[p];
            for (std::size_t g = 0; g < grid.size(); ++g) {
                const std::size_t m = point_at(path, grid[g]);
                const DefaultState z = path.state(m);
                if (z.defaulted(cp)) continue;
                const ExposureRecord r = exposure(portfolio, tables, grid[g],
                                                  std::span<const double>(path.x(m), path.n_names), z,
                                                  s.sim.horizon, unused);
                double* row = rows.data() + (p * grid.size() + g) * width;
                std::copy(r.prices.begin(), r.prices.end(), row);
                row[nc] = r.exposure;
                row[nc + 1] = r.positive_part;
            }
            paid[p] = theta_stream(s.model, portfolio, tables, path, s.sim.horizon, unused);
        }
    });
    {
        auto out = open_out(s, "exposure.csv");
        std::vector<std::string> head{"time"};
        for (std::size_t c = 0; c < nc; ++c) head.push_back("price_" + std::to_string(c));
        head.push_back("exposure");
        head.push_back("positive_part");
        CsvWriter w(out, head);
        for (std::size_t g = 0; g < grid.size(); ++g) {
            w << grid[g];
            for (std::size_t k = 0; k < width; ++k) {
                RunningStats st;
                for (std::size_t p = 0; p < paths.size(); ++p) st.add(rows[(p * grid.size() + g) * width + k]);
                w << st.mean();
            }
            w.end_row();
        }
    }
    {
        auto out = open_out(s, "cva_term_structure.csv");
        CsvWriter w(out, {"time", "cva", "cva_se"});
        for (double t : grid) {
            RunningStats st;
            for (std::size_t p = 0; p < paths.size(); ++p)
                st.add(paths[p].default_times[cp] <= t ? paid[p] : 0.0);
            w << t << st.mean() << st.std_error();
            w.end_row();
        }
    }
    const Estimate nested = cva_value(s.model, portfolio, 0.0, s.model.initial_intensity,
                                      DefaultState(s.model.n_names), s.estimator);
    const Estimate tabled = summarize(paid);
    auto out = open_out(s, "summary.txt");
    out << "mode=cva\npaths=" << paths.size() << "\nseed=" << s.sim.seed << "\ncva_tables=" << fmt(tabled.value)
        << "\ncva_tables_se=" << fmt(tabled.std_error) << "\ncva_nested=" << fmt(nested.value)
        << "\ncva_nested_se=" << fmt(nested.std_error) << "\ncva_nested_paths=" << nested.n_paths << '\n';
}

void run_hedge(const Scenario& s)
{
    const Portfolio portfolio = s.portfolio.build(s.model.n_names);
    const ValueTables tables(s.model, portfolio, s.estimator, s.tables);
    HedgeConfig hcfg = s.hedge;
    hcfg.keep_rows = std::max(hcfg.keep_rows, s.report_paths);
    const auto reports = hedge_ensemble(s.model, portfolio, tables, s.estimator, hcfg, s.sim.n_paths);
    const std::vector<std::string> columns{"time", "theta", "eta", "value", "U1", "U2", "U3", "phi", "dC", "dA"};
    auto write_row = [](CsvWriter& w, const HedgeRow& r) {
        w << r.time << r.theta << r.eta << r.value << r.u1 << r.u2 << r.u3 << r.phi << r.dC << r.dA;
        w.end_row();
    };
    if (!reports.empty()) {
        auto out = open_out(s, "hedge.csv");
        CsvWriter w(out, columns);
        for (const auto& r : reports[0].rows) write_row(w, r);
    }
    {
        auto out = open_out(s, "hedge_paths.csv");
        std::vector<std::string> head{"path"};
        head.insert(head.end(), columns.begin(), columns.end());
        CsvWriter w(out, head);
        for (std::size_t p = 0; p < std::min(reports.size(), s.report_paths); ++p)
            for (const auto& r : reports[p].rows) {
                w << p;
                write_row(w, r);
            }
    }
    auto out = open_out(s, "gkw_summary.txt");
    out << "mode=hedge\npaths=" << reports.size() << "\nseed=" << s.sim.seed << '\n';
    if (reports.size() < hcfg.min_paths) {
        out << "diagnostics=skipped (fewer than " << hcfg.min_paths << " paths)\n";
        return;
    }
    const GkwSummary g = gkw_diagnostics(reports, tables.times(), hcfg);
    out << "zero_achieving=" << (g.zero_achieving() ? "PASS" : "FAIL") << "\nmax_final_value="
        << fmt(g.max_final_value) << "\ncost_martingale=" << (g.cost_martingale() ? "PASS" : "FAIL")
        << "\northogonal=" << (g.orthogonal() ? "PASS" : "FAIL") << "\nrisk_dominant="
        << (g.risk_dominant() ? "PASS" : "FAIL") << "\nrisk=" << fmt(g.risk.value) << "\nrisk_se="
        << fmt(g.risk.std_error) << "\nmean_residual=" << fmt(g.mean_residual.value) << "\nmean_residual_se="
        << fmt(g.mean_residual.std_error) << "\nmean_theta_paid=" << fmt(g.mean_theta_paid.value)
        << "\nguarded_steps=" << g.guarded_steps << '\n';
    for (const auto& p : g.probes)
        out << "probe_" << fmt(p.scale) << "=" << fmt(p.risk) << " excess=" << fmt(p.excess)
            << " se=" << fmt(p.excess_se) << (p.dominated ? " PASS" : " FAIL") << '\n';
    auto buckets = open_out(s, "gkw_buckets.csv");
    CsvWriter w(buckets, {"time", "mean_cost", "mean_cost_se", "cumulative_cost", "cumulative_cost_se",
                          "covariance", "covariance_se"});
    for (std::size_t b = 0; b < g.mean_cost.size(); ++b) {
        w << g.times[b + 1] << g.mean_cost[b].value << g.mean_cost[b].std_error << g.cumulative_cost[b].value
          << g.cumulative_cost[b].std_error << g.covariance[b].value << g.covariance[b].std_error;
        w.end_row();
    }
}

bool run_verify(const Scenario& s)
{
    const Portfolio portfolio = s.portfolio.build(s.model.n_names);
    const auto specs = specs_of(portfolio);
    const std::size_t n = s.model.n_names;
    const std::size_t cp = s.model.counterparty();
    const std::vector<double>& x0 = s.model.initial_intensity;
    const DefaultState z0(n);
    std::ostringstream report;
    bool all = true;
    auto check = [&](const std::string& name, bool ok, const std::string& detail) {
        report << (ok ? "PASS " : "FAIL ") << name << ": " << detail << '\n';
        all = all && ok;
    };
    auto show = [](const Estimate& e) { return fmt(e.value) + " +- " + fmt(e.std_error); };

    // compensated default indicators
    {
        const auto paths = market_paths(s, s.sim.n_paths);
        for (std::size_t i = 0; i < n; ++i) {
            RunningStats mart;
            for (const auto& p : paths)
                mart.add((p.default_times[i] <= s.sim.horizon ? 1.0 : 0.0) - p.compensator(p.size() - 1, i));
            const Estimate e = mart.estimate();
            check("martingale_" + std::to_string(i), agree(e, 0.0), show(e));
        }
    }

    // values at the all-defaulted state and g after the counterparty default
    {
        bool ok = true;
        std::ostringstream detail;
        const std::uint32_t full = (1u << n) - 1;
        EstimatorConfig small = s.estimator;
        small.n_paths = 16;
        for (std::size_t c = 0; c < specs.size(); ++c) {
            const Estimate e = estimate_F_recursive(s.model, specs[c], 0.0, x0, DefaultState(n, full), small);
            const double exact = specs[c].full_default(DefaultState(n, full), s.sim.horizon);
            ok = ok && e.value == exact;
            detail << "F" << c << "=" << fmt(e.value) << " ";
        }
        for (std::uint32_t b = 0; b <= full; ++b) {
            const DefaultState z(n, b);
            if (!z.defaulted(cp)) continue;
            const Estimate e = estimate_g(s.model, portfolio, 0.0, x0, z, small);
            ok = ok && e.value == 0.0;
        }
        detail << "g=0 on counterparty-defaulted states";
        check("exact_states", ok, detail.str());
    }

    // direct against recursive at every state
    for (std::size_t c = 0; c < specs.size(); ++c) {
        for (std::uint32_t b = 0; b < (1u << n); ++b) {
            const DefaultState z(n, b);
            const Estimate d = estimate_F_direct(s.model, specs[c], 0.0, x0, z, s.estimator);
            const Estimate r = estimate_F_recursive(s.model, specs[c], 0.0, x0, z, s.estimator);
            check("direct_vs_recursive_" + std::to_string(c) + "_" + state_label(z), agree(d, r),
                  show(d) + " vs " + show(r));
        }
    }

    // against the closed forms
    if (oracle_supports(portfolio)) {
        const OracleConfig oc = oracle_config(s);
        for (std::uint32_t b = 0; b < (1u << n); ++b) {
            const DefaultState z(n, b);
            const Estimate o = portfolio_oracle(s.model, portfolio, OracleQuantity::claim, z, 0.0, x0, oc);
            const Estimate d = estimate_F_direct(s.model, specs[0], 0.0, x0, z, s.estimator);
            check("oracle_" + state_label(z), agree(d, o), show(d) + " vs " + show(o));
        }
    }

    // alpha linearity
    {
        CauchySpec a = specs[0], bc = specs[0], all3 = specs[0];
        a.alpha = {1.0, 0.0, 0.0};
        bc.alpha = {0.0, 1.0, 1.0};
        EstimatorConfig e1 = s.estimator, e2 = s.estimator, e3 = s.estimator;
        e2.seed = s.estimator.seed + 1;
        e3.seed = s.estimator.seed + 2;
        const Estimate fa = estimate_F_direct(s.model, a, 0.0, x0, z0, e1);
        const Estimate fb = estimate_F_direct(s.model, bc, 0.0, x0, z0, e2);
        const Estimate f = estimate_F_direct(s.model, all3, 0.0, x0, z0, e3);
        const Estimate sum{fa.value + fb.value, std::hypot(fa.std_error, fb.std_error), fa.n_paths};
        check("alpha_linearity", agree(sum, f), show(sum) + " vs " + show(f));
    }

    auto out = open_out(s, "verify_report.txt");
    out << report.str();
    return all;
}

int run(const Scenario& s, std::ostream& log)
{
    try {
        switch (s.mode) {
        case RunMode::simulate: run_simulate(s); break;
        case RunMode::price: run_price(s); break;
        case RunMode::cva: run_cva(s); break;
        case RunMode::hedge: run_hedge(s); break;
        case RunMode::verify:
            if (!run_verify(s)) {
                log << "verification failed, see " << (fs::path(s.output_dir) / "verify_report.txt").string()
                    << '\n';
                return exit_numerical;
            }
            break;
        }
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const SimulationError& e) {
        log << "numerical failure (seed " << s.sim.seed << "): " << e.what() << '\n';
        return exit_numerical;
    } catch (const EstimatorError& e) {
        log << "numerical failure (seed " << s.sim.seed << "): " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::invalid_argument& e) {
        log << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const fs::filesystem_error& e) {
        log << "config error: " << e.what() << '\n';
        return exit_config;
    }
    return exit_ok;
}

}  // namespace cvahedge
