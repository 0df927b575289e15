#include "cvahedge/hedging.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cvahedge/cva.hpp"
#include "cvahedge/parallel.hpp"

namespace cvahedge {

namespace {

std::vector<double> shifted(const ModelParams& params, std::span<const double> x, DefaultState z, std::size_t j)
{
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t i = 0; i < out.size(); ++i)
        if (i != j && !z.defaulted(i)) out[i] += params.w(i, j);
    return out;
}

void require_alive(const ModelParams& params, DefaultState z, const char* what)
{
    if (z.defaulted(params.counterparty()))
        throw std::domain_error(std::string(what) + ": counterparty already defaulted, hedge not defined");
}

}  // namespace

HedgeInputs hedge_inputs(const ModelParams& params, const Portfolio& portfolio, const ValueTables& tables, double t,
                         std::span<const double> x, DefaultState z)
{
    require_alive(params, z, "hedge_inputs");
    const std::size_t n = params.n_names;
    const std::size_t cp = params.counterparty();
    HedgeInputs in;
    in.grad_g.assign(n, 0.0);
    in.grad_cds.assign(n, 0.0);
    in.cds_jump.assign(n, 0.0);
    in.g_jump.assign(n, 0.0);
    in.g = tables.value(tables.g_index(), t, x, z, in.grad_g);
    in.f_cds = tables.value(tables.counterparty_index(), t, x, z, in.grad_cds);
    for (std::size_t j = 0; j < n; ++j) {
        if (z.defaulted(j)) continue;
        const auto xj = shifted(params, x, z, j);
        in.cds_jump[j] = tables.value(tables.counterparty_index(), t, xj, z.flip(j)) - in.f_cds;
        if (j != cp) in.g_jump[j] = tables.value(tables.g_index(), t, xj, z.flip(j)) - in.g;
    }
    RandomStream unused(0, 0);
    in.upsilon = upsilon(params, portfolio, tables, t, x, z, unused);
    return in;
}

HedgeInputs hedge_inputs_mc(const ModelParams& params, const Portfolio& portfolio, double t,
                            std::span<const double> x, DefaultState z, const EstimatorConfig& cfg)
{
    require_alive(params, z, "hedge_inputs_mc");
    const std::size_t n = params.n_names;
    const std::size_t cp = params.counterparty();
    const CauchySpec cds{{1.0, 1.0, 1.0}, portfolio.counterparty_cds};
    PointEstimator g = [&](double tt, std::span<const double> xx, DefaultState zz, const EstimatorConfig& c) {
        return estimate_g(params, portfolio, tt, xx, zz, c);
    };
    PointEstimator f = [&](double tt, std::span<const double> xx, DefaultState zz, const EstimatorConfig& c) {
        return estimate_F_recursive(params, cds, tt, xx, zz, c);
    };
    HedgeInputs in;
    in.g = g(t, x, z, cfg).value;
    in.grad_g = gradient_x(g, t, x, z, cfg);
    in.f_cds = f(t, x, z, cfg).value;
    in.grad_cds = gradient_x(f, t, x, z, cfg);
    in.cds_jump.assign(n, 0.0);
    in.g_jump.assign(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        if (z.defaulted(j)) continue;
        in.cds_jump[j] = jump_difference(params, f, t, x, z, j, cfg).value;
        if (j != cp) in.g_jump[j] = jump_difference(params, g, t, x, z, j, cfg).value;
    }
    const NestedValueSource values(params, portfolio, cfg, cfg.n_paths);
    RandomStream rng(cfg.seed, stream_id(StreamDomain::inner, 0));
    in.upsilon = upsilon(params, portfolio, values, t, x, z, rng);
    return in;
}

std::vector<double> diffusion_loading(const ModelParams& params, const std::vector<double>& grad,
                                      std::span<const double> x, DefaultState z)
{
    std::vector<double> v(params.n_factors(), 0.0);
    for (std::size_t i = 0; i < params.n_names; ++i) {
        if (z.defaulted(i)) continue;
        const double root = std::sqrt(std::max(x[i], 0.0));
        for (std::size_t k = 0; k < v.size(); ++k) v[k] += grad[i] * params.vol(i, k) * root;
    }
    return v;
}

HedgeTerms hedge_terms(const ModelParams& params, const HedgeInputs& in, std::span<const double> x, DefaultState z)
{
    require_alive(params, z, "hedge_terms");
    const std::size_t cp = params.counterparty();
    HedgeTerms h;
    const auto vg = diffusion_loading(params, in.grad_g, x, z);
    const auto vc = diffusion_loading(params, in.grad_cds, x, z);
    for (std::size_t k = 0; k < vc.size(); ++k) {
        h.u1 += vg[k] * vc[k];
        h.phi += vc[k] * vc[k];
    }
    const double gcp = in.cds_jump[cp];
    h.u2 = in.upsilon * gcp * x[cp];
    for (std::size_t j = 0; j < params.n_names; ++j) {
        if (z.defaulted(j)) continue;
        h.phi += in.cds_jump[j] * in.cds_jump[j] * x[j];
        if (j != cp) h.u3 += in.g_jump[j] * in.cds_jump[j] * x[j];
    }
    h.u3 += -in.g * gcp * x[cp];
    const double u = h.u1 + h.u2 + h.u3;
    if (h.phi < phi_guard * std::max(1.0, std::abs(u))) {
        h.guarded = true;
        h.theta = 0.0;
    } else {
        h.theta = u / h.phi;
    }
    return h;
}

HedgeTerms bucket_terms(const ModelParams& params, const Portfolio& portfolio, const ValueTables& tables, double t0,
                        double t1, std::span<const double> x, DefaultState z, std::size_t points)
{
    require_alive(params, z, "bucket_terms");
    if (points <= 1) return hedge_terms(params, hedge_inputs(params, portfolio, tables, t0, x, z), x, z);
    // midpoints along the conditional mean of the pre-default intensities
    HedgeTerms acc;
    std::vector<double> xs(x.begin(), x.end());
    for (std::size_t q = 0; q < points; ++q) {
        const double u = (t1 - t0) * (static_cast<double>(q) + 0.5) / static_cast<double>(points);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (z.defaulted(i)) continue;
            const double k = params.kappa[i], v = params.nu[i];
            xs[i] = v > 0.0 ? k / v + (x[i] - k / v) * std::exp(-v * u) : x[i] + k * u;
        }
        const HedgeTerms h = hedge_terms(params, hedge_inputs(params, portfolio, tables, t0 + u, xs, z), xs, z);
        acc.u1 += h.u1;
        acc.u2 += h.u2;
        acc.u3 += h.u3;
        acc.phi += h.phi;
    }
    const double inv = 1.0 / static_cast<double>(points);
    acc.u1 *= inv;
    acc.u2 *= inv;
    acc.u3 *= inv;
    acc.phi *= inv;
    const double u = acc.u1 + acc.u2 + acc.u3;
    if (acc.phi < phi_guard * std::max(1.0, std::abs(u))) {
        acc.guarded = true;
    } else {
        acc.theta = u / acc.phi;
    }
    return acc;
}

double phi(const ModelParams& params, const HedgeInputs& in, std::span<const double> x, DefaultState z)
{
    return hedge_terms(params, in, x, z).phi;
}

HedgeTerms u_terms(const ModelParams& params, const HedgeInputs& in, std::span<const double> x, DefaultState z)
{
    return hedge_terms(params, in, x, z);
}

double theta_gkw(const ModelParams& params, const HedgeInputs& in, double t, std::span<const double> x,
                 DefaultState z, double maturity)
{
    require_alive(params, z, "theta_gkw");
    if (t >= maturity) throw std::domain_error("theta_gkw: t must be before the maturity");
    const HedgeTerms h = hedge_terms(params, in, x, z);
    if (h.guarded) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "theta_gkw: phi=" << h.phi << " below guard (U1=" << h.u1 << ", U2=" << h.u2 << ", U3=" << h.u3 << ")";
        throw EstimatorError(msg.str());
    }
    return h.theta;
}

HedgeReport full_strategy(const ModelParams& params, const Portfolio& portfolio, const ValueTables& tables,
                          const MarketPath& path, const EstimatorConfig& cfg, const HedgeConfig& hcfg,
                          std::uint64_t path_index)
{
    const auto& times = tables.times();
    const std::size_t M = times.size() - 1;
    const std::size_t n = params.n_names;
    const std::size_t cp = params.counterparty();
    const double T = cfg.maturity;
    if (path.size() == 0 || path.times.front() != 0.0 || path.times.back() != T)
        throw std::invalid_argument("full_strategy: path must cover [0, T]");
    const SimConfig sim = cfg.sim();
    const std::size_t value_paths = std::max<std::size_t>(1, hcfg.value_paths);
    MarketPath scratch;
    auto remaining_cva = [&](std::size_t b, std::span<const double> x, DefaultState z) {
        if (b >= M || portfolio.is_zero() || z.defaulted(cp)) return 0.0;
        RandomStream rng(cfg.seed, stream_id(StreamDomain::inner, path_index * (M + 1) + b));
        double acc = 0.0;
        for (std::size_t r = 0; r < value_paths; ++r)
            acc += cva_sample(params, portfolio, tables, times[b], x, z, sim, rng, scratch);
        return acc / static_cast<double>(value_paths);
    };

    HedgeReport rep;
    rep.dV.assign(M, 0.0);
    rep.dY.assign(M, 0.0);
    rep.theta_dY.assign(M, 0.0);
    std::size_t p = 0;
    std::span<const double> x0(path.x(0), n);
    double V = remaining_cva(0, x0, path.state(0));
    double Y = tables.value(tables.counterparty_index(), 0.0, x0, path.state(0));
    double last_dc = 0.0;
    std::vector<double> dw(params.n_factors());
    for (std::size_t b = 0; b < M; ++b) {
        if (path.times[p] != times[b]) throw std::logic_error("full_strategy: path is not on the table grid");
        const std::span<const double> xb(path.x(p), n);
        const DefaultState zb = path.state(p);
        const HedgeInputs in = hedge_inputs(params, portfolio, tables, times[b], xb, zb);
        const HedgeTerms terms =
            bucket_terms(params, portfolio, tables, times[b], times[b + 1], xb, zb, hcfg.bucket_points);
        const auto vc = diffusion_loading(params, in.grad_cds, xb, zb);

        HedgeRow row;
        row.time = times[b];
        row.theta = terms.theta;
        row.value = V;
        row.eta = V - terms.theta * Y;
        row.u1 = terms.u1;
        row.u2 = terms.u2;
        row.u3 = terms.u3;
        row.phi = terms.phi;
        row.dC = row.dA = last_dc;
        row.guarded = terms.guarded;
        rep.rows.push_back(row);

        // walk the path to the next base point
        std::size_t q = p;
        std::fill(dw.begin(), dw.end(), 0.0);
        std::vector<double> comp(n, 0.0);
        std::size_t cp_point = 0;
        while (path.times[q] < times[b + 1]) {
            const double* d = path.dw(q);
            for (std::size_t k = 0; k < dw.size(); ++k) dw[k] += d[k];
            for (std::size_t j = 0; j < n; ++j) comp[j] += path.compensator_increment(q, j);
            ++q;
            if (!cp_point && path.state(q).defaulted(cp) && !zb.defaulted(cp)) cp_point = q;
        }
        const DefaultState zq = path.state(q);
        double dY = 0.0;
        for (std::size_t k = 0; k < dw.size(); ++k) dY += vc[k] * dw[k];
        for (std::size_t j = 0; j < n; ++j) {
            if (zb.defaulted(j)) continue;
            const double dH = zq.defaulted(j) ? 1.0 : 0.0;
            dY += in.cds_jump[j] * (dH - comp[j]);
        }
        double V_next = 0.0;
        if (cp_point) {
            const double tau = path.times[cp_point];
            if (tau < T) {
                RandomStream unused(0, 0);
                rep.theta_paid =
                    upsilon(params, portfolio, tables, tau, std::span<const double>(path.x_left(cp_point), n),
                            path.state(cp_point - 1), unused);
            }
            rep.counterparty_default = true;
            V_next = rep.theta_paid;
        } else {
            V_next = remaining_cva(b + 1, std::span<const double>(path.x(q), n), zq);
        }
        const double dV = V_next - V;
        const double dC = dV - terms.theta * dY;
        rep.dV[b] = dV;
        rep.dY[b] = dY;
        rep.theta_dY[b] = terms.theta * dY;
        V = V_next;
        Y += dY;
        last_dc = dC;
        p = q;
        if (cp_point || b + 1 == M) {
            HedgeRow end;
            end.time = cp_point ? path.times[cp_point] : T;
            end.value = V - rep.theta_paid;
            end.eta = end.value;
            end.dC = end.dA = dC;
            rep.rows.push_back(end);
            rep.final_value = end.value;
            break;
        }
    }
    return rep;
}

std::vector<HedgeReport> hedge_ensemble(const ModelParams& params, const Portfolio& portfolio,
                                        const ValueTables& tables, const EstimatorConfig& cfg,
                                        const HedgeConfig& hcfg, std::size_t n_paths)
{
    std::vector<HedgeReport> out(n_paths);
    const SimConfig sim = cfg.sim();
    parallel_for(n_paths, cfg.threads, [&](std::size_t begin, std::size_t end) {
        MarketPath path;
        for (std::size_t i = begin; i < end; ++i) {
            RandomStream rng(cfg.seed, stream_id(StreamDomain::hedge, i));
            simulate_market(params, sim, 0.0, params.initial_intensity, DefaultState(params.n_names), rng, path);
            out[i] = full_strategy(params, portfolio, tables, path, cfg, hcfg, i);
            if (i >= hcfg.keep_rows) {
                out[i].rows.clear();
                out[i].rows.shrink_to_fit();
            }
        }
    });
    return out;
}

bool GkwSummary::cost_martingale(double k) const
{
    for (std::size_t b = 0; b < mean_cost.size(); ++b) {
        if (!agree(mean_cost[b], 0.0, k, 1e-15)) return false;
        if (!agree(cumulative_cost[b], 0.0, k, 1e-15)) return false;
    }
    return true;
}

bool GkwSummary::orthogonal(double k) const
{
    for (const auto& c : covariance)
        if (!agree(c, 0.0, k, 1e-15)) return false;
    return true;
}

bool GkwSummary::risk_dominant() const
{
    for (const auto& p : probes)
        if (!p.dominated) return false;
    return true;
}

GkwSummary gkw_diagnostics(const std::vector<HedgeReport>& reports, const std::vector<double>& times,
                           const HedgeConfig& hcfg, const std::vector<double>& probe_scales)
{
    const std::size_t n = reports.size();
    if (n < hcfg.min_paths)
        throw std::invalid_argument("gkw_diagnostics: insufficient paths (" + std::to_string(n) + " < " +
                                    std::to_string(hcfg.min_paths) + ")");
    const std::size_t M = times.size() - 1;
    GkwSummary s;
    s.n_paths = n;
    s.times = times;
    std::vector<double> cumulative(n, 0.0), L(n, 0.0), Q(n, 0.0);
    for (std::size_t b = 0; b < M; ++b) {
        RunningStats cost, cum, a_stats, y_stats;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = reports[i];
            const double dc = r.dV[b] - r.theta_dY[b];
            cumulative[i] += dc;
            cost.add(dc);
            cum.add(cumulative[i]);
            a_stats.add(dc);
            y_stats.add(r.dY[b]);
        }
        RunningStats prod;
        for (std::size_t i = 0; i < n; ++i) {
            const auto& r = reports[i];
            prod.add((r.dV[b] - r.theta_dY[b] - a_stats.mean()) * (r.dY[b] - y_stats.mean()));
        }
        s.mean_cost.push_back(cost.estimate());
        s.cumulative_cost.push_back(cum.estimate());
        Estimate cov = prod.estimate();
        cov.value *= static_cast<double>(n) / static_cast<double>(n - 1);
        s.covariance.push_back(cov);
    }
    RunningStats risk, residual, paid;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& r = reports[i];
        for (std::size_t b = 0; b < M; ++b) {
            L[i] += r.dV[b];
            Q[i] += r.theta_dY[b];
        }
        const double c = L[i] - Q[i];
        risk.add(c * c);
        residual.add(c);
        paid.add(r.theta_paid);
        s.max_final_value = std::max(s.max_final_value, std::abs(r.final_value));
        for (const auto& row : r.rows) s.guarded_steps += row.guarded;
    }
    s.risk = risk.estimate();
    s.mean_residual = residual.estimate();
    s.mean_theta_paid = paid.estimate();
    s.theta_variance = paid.variance();
    for (double scale : probe_scales) {
        RunningStats excess, level;
        for (std::size_t i = 0; i < n; ++i) {
            const double probe = L[i] - scale * Q[i];
            const double opt = L[i] - Q[i];
            excess.add(probe * probe - opt * opt);
            level.add(probe * probe);
        }
        ProbeResult pr;
        pr.scale = scale;
        pr.risk = level.mean();
        pr.excess = excess.mean();
        pr.excess_se = excess.std_error();
        pr.dominated = pr.excess >= -3.0 * pr.excess_se - 1e-15;
        s.probes.push_back(pr);
    }
    return s;
}

}  // namespace cvahedge
