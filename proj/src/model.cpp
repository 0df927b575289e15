#include "cvahedge/model.hpp"

#include <algorithm>
#include <cmath>

namespace cvahedge {

std::string to_string(Scheme s)
{
    return s == Scheme::euler_full_truncation ? "euler_full_truncation" : "exact_where_available";
}

Scheme scheme_from_string(const std::string& s)
{
    if (s == "euler_full_truncation") return Scheme::euler_full_truncation;
    if (s == "exact_where_available") return Scheme::exact_where_available;
    throw std::invalid_argument("unknown scheme '" + s + "'");
}

double ModelParams::total_variance(std::size_t i) const
{
    double v = 0.0;
    for (std::size_t k = 0; k < n_factors(); ++k) v += vol(i, k) * vol(i, k);
    return v;
}

namespace {

void check(bool ok, const std::string& what)
{
    if (!ok) throw std::invalid_argument(what);
}

void check_finite_nonneg(const std::vector<double>& v, const std::string& field)
{
    for (std::size_t i = 0; i < v.size(); ++i)
        check(std::isfinite(v[i]) && v[i] >= 0.0, field + "[" + std::to_string(i) + "] must be finite and >= 0");
}

}  // namespace

void ModelParams::validate() const
{
    check(n_names >= 1 && n_names <= max_names, "model.n_names must be in 1..20");
    check(kappa.size() == n_names, "model.kappa must have n_names entries");
    check(nu.size() == n_names, "model.nu must have n_names entries");
    check(initial_intensity.size() == n_names, "model.initial_intensity must have n_names entries");
    check_finite_nonneg(kappa, "model.kappa");
    check_finite_nonneg(nu, "model.nu");
    check_finite_nonneg(sigma, "model.sigma");
    for (std::size_t i = 0; i < n_names; ++i)
        check(std::isfinite(initial_intensity[i]) && initial_intensity[i] > 0.0,
              "model.initial_intensity[" + std::to_string(i) + "] must be > 0");
    if (!vol_override.empty()) {
        check(vol_override.size() == n_names, "model.vol_override must have n_names rows");
        for (std::size_t i = 0; i < n_names; ++i) {
            check(vol_override[i].size() == sigma.size(),
                  "model.vol_override[" + std::to_string(i) + "] must have one entry per factor");
            check_finite_nonneg(vol_override[i], "model.vol_override[" + std::to_string(i) + "]");
        }
    }
    check(contagion.size() == n_names, "model.contagion must be n_names x n_names");
    for (std::size_t i = 0; i < n_names; ++i) {
        check(contagion[i].size() == n_names, "model.contagion must be n_names x n_names");
        check_finite_nonneg(contagion[i], "model.contagion[" + std::to_string(i) + "]");
    }
}

std::vector<bool> feller_check(const ModelParams& params)
{
    std::vector<bool> out(params.n_names);
    for (std::size_t i = 0; i < params.n_names; ++i) out[i] = 2.0 * params.kappa[i] >= params.total_variance(i);
    return out;
}

void SimConfig::validate() const
{
    check(std::isfinite(horizon) && horizon > 0.0, "sim.horizon must be > 0");
    check(std::isfinite(dt) && dt > 0.0, "sim.dt must be > 0");
    check(n_paths >= 1, "sim.n_paths must be >= 1");
    check(substep_cap >= 1, "sim.substep_cap must be >= 1");
    check(threads >= 1, "sim.threads must be >= 1");
}

std::size_t step_count(double t, double horizon, double dt)
{
    const double span = horizon - t;
    if (span <= 0.0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt - 1e-9)));
}

double compensator_increment(double x_begin, double x_end, double dt)
{
    return 0.5 * (x_begin + x_end) * dt;
}

Dynamics::Dynamics(const ModelParams& p, Scheme scheme)
    : n_(p.n_names), k_(p.n_factors()), kappa_(p.kappa), nu_(p.nu), vol_(n_ * k_), w_(n_ * n_), exact_(n_, 0)
{
    for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t k = 0; k < k_; ++k) vol_[i * k_ + k] = p.vol(i, k);
        for (std::size_t j = 0; j < n_; ++j) w_[i * n_ + j] = p.w(i, j);
        exact_[i] = scheme == Scheme::exact_where_available && p.total_variance(i) == 0.0;
    }
}

void Dynamics::step(double* x, std::uint32_t defaulted, double h, const double* dw) const
{
    for (std::size_t i = 0; i < n_; ++i) {
        if ((defaulted >> i) & 1u) continue;
        double xi = x[i];
        if (exact_[i]) {
            // dx = (kappa - nu x) dt solved exactly
            if (nu_[i] > 0.0) {
                const double m = kappa_[i] / nu_[i];
                xi = m + (xi - m) * std::exp(-nu_[i] * h);
            } else {
                xi += kappa_[i] * h;
            }
        } else {
            const double xp = std::max(xi, 0.0);
            double diff = 0.0;
            const double* v = vol_.data() + i * k_;
            for (std::size_t k = 0; k < k_; ++k) diff += v[k] * dw[k];
            xi += (kappa_[i] - nu_[i] * xp) * h + std::sqrt(xp) * diff;
        }
        x[i] = std::max(xi, intensity_floor);
    }
}

Trajectory simulate_diffusion_only(const ModelParams& params, double t, std::span<const double> x, double horizon,
                                   const SimConfig& config, RandomStream& rng)
{
    if (x.size() != params.n_names) throw std::invalid_argument("simulate_diffusion_only: x has wrong size");
    for (double v : x)
        if (!(v > 0.0)) throw std::domain_error("simulate_diffusion_only: intensities must be > 0");
    if (!(t < horizon)) throw std::domain_error("simulate_diffusion_only: t must be before the horizon");
    const Dynamics dyn(params, config.scheme);
    const std::size_t steps = step_count(t, horizon, config.dt);
    const double h = (horizon - t) / static_cast<double>(steps);
    const double sq = std::sqrt(h);
    Trajectory out;
    out.n_names = params.n_names;
    out.times.resize(steps + 1);
    out.values.resize((steps + 1) * params.n_names);
    std::vector<double> cur(x.begin(), x.end()), dw(params.n_factors());
    std::copy(cur.begin(), cur.end(), out.values.begin());
    out.times[0] = t;
    for (std::size_t m = 1; m <= steps; ++m) {
        for (auto& d : dw) d = sq * rng.normal();
        dyn.step(cur.data(), 0u, h, dw.data());
        out.times[m] = m == steps ? horizon : t + static_cast<double>(m) * h;
        std::copy(cur.begin(), cur.end(), out.values.begin() + static_cast<std::ptrdiff_t>(m * params.n_names));
    }
    return out;
}

namespace {

void push_point(MarketPath& p, double t, const double* x, const double* x_left, std::uint32_t bits,
                const double* cumulative)
{
    p.times.push_back(t);
    p.intensities.insert(p.intensities.end(), x, x + p.n_names);
    p.left_intensities.insert(p.left_intensities.end(), x_left, x_left + p.n_names);
    p.states.push_back(bits);
    p.compensators.insert(p.compensators.end(), cumulative, cumulative + p.n_names);
}

}  // namespace

void simulate_market(const ModelParams& params, const SimConfig& config, double t, std::span<const double> x,
                     DefaultState z, RandomStream& rng, MarketPath& out)
{
    const std::size_t n = params.n_names;
    const std::size_t nk = params.n_factors();
    if (x.size() != n || z.size() != n) throw std::invalid_argument("simulate_market: state has wrong size");
    const Dynamics dyn(params, config.scheme);

    out.n_names = n;
    out.n_factors = nk;
    out.times.clear();
    out.intensities.clear();
    out.left_intensities.clear();
    out.states.clear();
    out.brownian.clear();
    out.compensator_increments.clear();
    out.compensators.clear();
    out.default_times.assign(n, never);

    std::vector<double> cur(x.begin(), x.end()), trial(n), left(n), comp(n, 0.0), clock(n), inc(n), dw(nk),
        dw1(nk);
    std::uint32_t bits = z.bits();
    for (std::size_t i = 0; i < n; ++i) {
        clock[i] = rng.exponential();
        if (!z.defaulted(i) && !(cur[i] > 0.0))
            throw std::domain_error("simulate_market: surviving intensities must be > 0");
    }
    push_point(out, t, cur.data(), cur.data(), bits, comp.data());
    const std::size_t steps = step_count(t, config.horizon, config.dt);
    if (steps == 0) return;
    const double h_base = (config.horizon - t) / static_cast<double>(steps);
    const double sq = std::sqrt(h_base);

    for (std::size_t m = 0; m < steps; ++m) {
        const double t_end = m + 1 == steps ? config.horizon : t + static_cast<double>(m + 1) * h_base;
        double t0 = out.times.back();
        double h = t_end - t0;
        for (auto& d : dw) d = sq * rng.normal();
        std::size_t substeps = 0;
        while (true) {
            trial = cur;
            dyn.step(trial.data(), bits, h, dw.data());
            std::size_t first = n;
            double f_first = 2.0;
            for (std::size_t i = 0; i < n; ++i) {
                if ((bits >> i) & 1u) {
                    inc[i] = 0.0;
                    continue;
                }
                inc[i] = compensator_increment(cur[i], trial[i], h);
                if (comp[i] + inc[i] >= clock[i]) {
                    const double f = inc[i] > 0.0 ? std::clamp((clock[i] - comp[i]) / inc[i], 0.0, 1.0) : 0.0;
                    if (f < f_first) {
                        f_first = f;
                        first = i;
                    }
                }
            }
            if (first == n) {
                for (std::size_t i = 0; i < n; ++i) comp[i] += inc[i];
                cur = trial;
                out.brownian.insert(out.brownian.end(), dw.begin(), dw.end());
                out.compensator_increments.insert(out.compensator_increments.end(), inc.begin(), inc.end());
                push_point(out, t_end, cur.data(), cur.data(), bits, comp.data());
                break;
            }
            if (++substeps > config.substep_cap)
                throw SimulationError("simulate_market: substep cap " + std::to_string(config.substep_cap) +
                                      " exceeded in step " + std::to_string(m) + " at t=" + std::to_string(t0) +
                                      " (stream " + std::to_string(rng.stream_id()) + ")");
            // Brownian bridge: split the step's increment at the default time
            const double f = f_first;
            const double bridge = std::sqrt(f * (1.0 - f) * h);
            for (std::size_t k = 0; k < nk; ++k) dw1[k] = f * dw[k] + bridge * rng.normal();
            left = cur;
            dyn.step(left.data(), bits, f * h, dw1.data());
            for (std::size_t i = 0; i < n; ++i) {
                if ((bits >> i) & 1u) continue;
                inc[i] = i == first ? clock[i] - comp[i] : f * inc[i];
                comp[i] = i == first ? clock[i] : comp[i] + inc[i];
            }
            const double tau = f >= 1.0 ? t_end : t0 + f * h;
            out.default_times[first] = tau;
            bits |= 1u << first;
            cur = left;
            for (std::size_t i = 0; i < n; ++i)
                if (!((bits >> i) & 1u)) cur[i] += dyn.w(i, first);
            out.brownian.insert(out.brownian.end(), dw1.begin(), dw1.end());
            out.compensator_increments.insert(out.compensator_increments.end(), inc.begin(), inc.end());
            push_point(out, tau, cur.data(), left.data(), bits, comp.data());
            if (tau >= t_end) break;
            for (std::size_t k = 0; k < nk; ++k) dw[k] -= dw1[k];
            t0 = tau;
            h = t_end - tau;
        }
    }
}

MarketPath simulate_market(const ModelParams& params, const SimConfig& config, RandomStream& rng)
{
    MarketPath path;
    simulate_market(params, config, 0.0, params.initial_intensity, DefaultState(params.n_names), rng, path);
    return path;
}

double squared_intensity_integral(const MarketPath& path)
{
    double total = 0.0;
    for (std::size_t m = 0; m + 1 < path.size(); ++m) {
        const double h = path.times[m + 1] - path.times[m];
        const std::uint32_t bits = path.states[m];
        const double* a = path.x(m);
        const double* b = path.x_left(m + 1);
        for (std::size_t i = 0; i < path.n_names; ++i)
            if (!((bits >> i) & 1u)) total += 0.5 * (a[i] * a[i] + b[i] * b[i]) * h;
    }
    return total;
}

}  // namespace cvahedge
