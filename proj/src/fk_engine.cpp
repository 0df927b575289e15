#include "cvahedge/fk_engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvahedge/parallel.hpp"

namespace cvahedge {

void EstimatorConfig::validate() const
{
    auto need = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(what);
    };
    need(std::isfinite(maturity) && maturity > 0.0, "estimator.maturity must be > 0");
    need(std::isfinite(dt) && dt > 0.0, "estimator.dt must be > 0");
    need(n_paths >= 1, "estimator.n_paths must be >= 1");
    need(inner_paths >= 1, "estimator.inner_paths must be >= 1");
    need(exposure_inner_paths >= 1, "estimator.exposure_inner_paths must be >= 1");
    need(h_rel > 0.0 && h_rel < 0.5, "estimator.h_rel must be in (0, 0.5)");
    need(recursion_depth_cap >= 1, "estimator.recursion_depth_cap must be >= 1");
    need(threads >= 1, "estimator.threads must be >= 1");
    need(substep_cap >= 1, "estimator.substep_cap must be >= 1");
}

SimConfig EstimatorConfig::sim() const
{
    SimConfig s;
    s.horizon = maturity;
    s.dt = dt;
    s.n_paths = n_paths;
    s.seed = seed;
    s.substep_cap = substep_cap;
    s.scheme = scheme;
    s.threads = threads;
    return s;
}

double phi1(double a)
{
    if (a < 1e-8) return 1.0 - 0.5 * a;
    return -std::expm1(-a) / a;
}

double phi2(double a)
{
    if (a < 1e-3) return 0.5 - a / 3.0 + a * a / 8.0 - a * a * a / 30.0;
    return (1.0 - std::exp(-a) * (1.0 + a)) / (a * a);
}

namespace {

void check_point(const ModelParams& params, double t, std::span<const double> x, DefaultState z,
                 const EstimatorConfig& cfg)
{
    if (x.size() != params.n_names || z.size() != params.n_names)
        throw std::invalid_argument("estimator: state dimension does not match the model");
    if (!(t >= 0.0 && t <= cfg.maturity)) throw std::domain_error("estimator: t outside [0, T]");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!z.defaulted(i) && !(x[i] > 0.0))
            throw std::domain_error("estimator: intensity of surviving name " + std::to_string(i) + " must be > 0");
}

// fills one sample per path via a per-chunk worker, reduces in index order
template <class MakeWorker>
Estimate run_paths(std::size_t n, std::size_t threads, MakeWorker&& make_worker)
{
    std::vector<double> samples(n);
    parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
        auto worker = make_worker();
        for (std::size_t i = begin; i < end; ++i) samples[i] = worker(i);
    });
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(samples[i]))
            throw EstimatorError("estimator: non-finite sample on path " + std::to_string(i));
    return summarize(samples);
}

double direct_integrand(const CauchySpec& spec, const MarketPath& path)
{
    const ClaimSpec& c = spec.claim;
    const std::size_t n = path.n_names;
    const std::size_t last = path.size() - 1;
    const DefaultState zt = path.state(last);
    double v = spec.terminal(zt);
    double running = 0.0;
    for (std::size_t m = 0; m < last; ++m) {
        const DefaultState z = path.state(m);
        const double dt = path.times[m + 1] - path.times[m];
        if (!c.k_at(z)) {
            running += c.a_at(z) * dt;
        } else {
            const double zz = c.z_at(z);
            for (std::size_t j = 0; j < n; ++j) {
                if (z.defaulted(j)) continue;
                running -= (c.z_at(z.flip(j)) - zz) * path.compensator_increment(m, j);
            }
        }
    }
    return v + spec.alpha[2] * running;
}

}  // namespace

Recursion::Recursion(const ModelParams& params, const EstimatorConfig& cfg)
    : params_(params), cfg_(cfg), dyn_(params, cfg.scheme)
{
    // sized up front so references into the buffers survive recursion
    walks_.resize(cfg.recursion_depth_cap + 1);
    points_.resize(cfg.recursion_depth_cap + 1);
}

DiscountWalk& Recursion::buffer(std::size_t depth)
{
    if (depth > cfg_.recursion_depth_cap)
        throw EstimatorError("recursive estimator: depth cap " + std::to_string(cfg_.recursion_depth_cap) +
                             " exceeded");
    return walks_[depth];
}

void make_walk(const Dynamics& dyn, double t, const double* x, std::uint32_t defaulted, std::size_t steps, double h,
               RandomStream& rng, DiscountWalk& out)
{
    const std::size_t n = dyn.n();
    const std::size_t nk = dyn.factors();
    if (nk > 64) throw std::invalid_argument("diffusion walk: at most 64 factors");
    out.n = n;
    out.steps = steps;
    out.t0 = t;
    out.h = h;
    out.x.resize((steps + 1) * n);
    out.xbar.resize(steps * n);
    out.lam.resize(steps);
    out.decay.resize(steps);
    out.level.resize(steps);
    out.disc.resize(steps + 1);
    std::copy(x, x + n, out.x.begin());
    out.disc[0] = 1.0;
    double dw[64];
    const double sq = std::sqrt(h);
    for (std::size_t m = 0; m < steps; ++m) {
        for (std::size_t k = 0; k < nk; ++k) dw[k] = sq * rng.normal();
        const double* a = out.x.data() + m * n;
        double* b = out.x.data() + (m + 1) * n;
        std::copy(a, a + n, b);
        dyn.step(b, defaulted, h, dw);
        double lam = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double xb = ((defaulted >> i) & 1u) ? 0.0 : 0.5 * (a[i] + b[i]);
            out.xbar[m * n + i] = xb;
            lam += xb;
        }
        const double ah = lam * h;
        out.lam[m] = lam;
        out.decay[m] = std::exp(-ah);
        out.level[m] = out.disc[m] * h * phi1(ah);
        out.disc[m + 1] = out.disc[m] * out.decay[m];
    }
}

void Recursion::walk(double t, const double* x, std::uint32_t defaulted, RandomStream& rng, DiscountWalk& out) const
{
    const std::size_t steps = step_count(t, cfg_.maturity, cfg_.dt);
    make_walk(dyn_, t, x, defaulted, steps, (cfg_.maturity - t) / static_cast<double>(steps), rng, out);
}

double Recursion::sample_jump_point(const DiscountWalk& w, std::size_t j, RandomStream& rng, double& s,
                                    std::vector<double>& xs) const
{
    const std::size_t n = w.n;
    weights_.resize(w.steps);
    double total = 0.0;
    for (std::size_t m = 0; m < w.steps; ++m) {
        total += w.xbar[m * n + j] * w.level[m];
        weights_[m] = total;
    }
    xs.resize(n);
    if (!(total > 0.0)) {
        s = w.t0;
        std::copy(w.x.begin(), w.x.begin() + static_cast<std::ptrdiff_t>(n), xs.begin());
        return 0.0;
    }
    const double u = rng.uniform() * total;
    std::size_t m = static_cast<std::size_t>(std::upper_bound(weights_.begin(), weights_.end(), u) - weights_.begin());
    if (m >= w.steps) m = w.steps - 1;
    const double v = rng.uniform();
    const double ah = w.lam[m] * w.h;
    const double off = ah > 1e-12 ? -std::log1p(-v * (1.0 - w.decay[m])) / w.lam[m] : v * w.h;
    const double frac = std::clamp(off / w.h, 0.0, 1.0);
    s = w.time(m) + frac * w.h;
    const double* a = w.x.data() + m * n;
    const double* b = w.x.data() + (m + 1) * n;
    for (std::size_t i = 0; i < n; ++i) xs[i] = a[i] + frac * (b[i] - a[i]);
    return total;
}

double Recursion::sample_F(const CauchySpec& spec, double t, const double* x, DefaultState z, RandomStream& rng,
                           std::size_t depth)
{
    const double T = cfg_.maturity;
    if (t >= T) return spec.terminal(z);
    if (z.all_defaulted()) return spec.full_default(z, T - t);
    DiscountWalk& w = buffer(depth);
    walk(t, x, z.bits(), rng, w);
    const ClaimSpec& c = spec.claim;
    const bool k = c.k_at(z);
    const std::size_t n = w.n;
    double value = spec.terminal(z) * w.disc[w.steps];
    if (!k) {
        double annuity = 0.0;
        for (double l : w.level) annuity += l;
        value += spec.alpha[2] * c.a_at(z) * annuity;
    }
    std::vector<std::size_t> alive;
    for (std::size_t j = 0; j < n; ++j)
        if (!z.defaulted(j)) alive.push_back(j);
    const double zz = c.z_at(z);

    auto child_average = [&](std::size_t j, double s, std::vector<double>& xs) {
        for (std::size_t i = 0; i < n; ++i)
            if (i != j && !z.defaulted(i)) xs[i] += dyn_.w(i, j);
        const DefaultState zj = z.flip(j);
        double acc = 0.0;
        for (std::size_t r = 0; r < cfg_.inner_paths; ++r) acc += sample_F(spec, s, xs.data(), zj, rng, depth + 1);
        return acc / static_cast<double>(cfg_.inner_paths);
    };

    if (alive.size() <= cfg_.branch_limit) {
        for (std::size_t j : alive) {
            double s = t;
            auto& xs = points_[depth];
            const double weight = sample_jump_point(walks_[depth], j, rng, s, xs);
            if (weight == 0.0) continue;
            const double comp = k ? spec.alpha[2] * (c.z_at(z.flip(j)) - zz) : 0.0;
            value += weight * (child_average(j, s, xs) - comp);
        }
    } else {
        std::vector<double> wj(alive.size());
        double total = 0.0;
        for (std::size_t r = 0; r < alive.size(); ++r) {
            const std::size_t j = alive[r];
            double sum = 0.0;
            for (std::size_t m = 0; m < w.steps; ++m) sum += w.xbar[m * n + j] * w.level[m];
            wj[r] = sum;
            total += sum;
            if (k) value -= spec.alpha[2] * (c.z_at(z.flip(j)) - zz) * sum;
        }
        if (total > 0.0) {
            double u = rng.uniform() * total;
            std::size_t r = 0;
            while (r + 1 < alive.size() && u >= wj[r]) u -= wj[r++];
            double s = t;
            auto& xs = points_[depth];
            sample_jump_point(walks_[depth], alive[r], rng, s, xs);
            value += total * child_average(alive[r], s, xs);
        }
    }
    return value;
}

double Recursion::sample_g(const Portfolio& portfolio, const ValueSource& values, double t, const double* x,
                           DefaultState z, RandomStream& rng, std::size_t depth)
{
    const double T = cfg_.maturity;
    const std::size_t cp = params_.counterparty();
    if (t >= T || z.defaulted(cp)) return 0.0;
    DiscountWalk& w = buffer(depth);
    walk(t, x, z.bits(), rng, w);
    const std::size_t n = w.n;
    double value = 0.0;
    {
        double s = t;
        auto& xs = points_[depth];
        const double weight = sample_jump_point(walks_[depth], cp, rng, s, xs);
        if (weight > 0.0) value += weight * upsilon(params_, portfolio, values, s, xs, z, rng);
    }
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j + 1 < n; ++j)
        if (!z.defaulted(j)) others.push_back(j);
    auto child = [&](std::size_t j, double s, std::vector<double>& xs) {
        for (std::size_t i = 0; i < n; ++i)
            if (i != j && !z.defaulted(i)) xs[i] += dyn_.w(i, j);
        return sample_g(portfolio, values, s, xs.data(), z.flip(j), rng, depth + 1);
    };
    if (others.size() + 1 <= cfg_.branch_limit) {
        for (std::size_t j : others) {
            double s = t;
            auto& xs = points_[depth];
            const double weight = sample_jump_point(walks_[depth], j, rng, s, xs);
            if (weight > 0.0) value += weight * child(j, s, xs);
        }
    } else if (!others.empty()) {
        std::vector<double> wj(others.size());
        double total = 0.0;
        for (std::size_t r = 0; r < others.size(); ++r) {
            double sum = 0.0;
            for (std::size_t m = 0; m < walks_[depth].steps; ++m)
                sum += walks_[depth].xbar[m * n + others[r]] * walks_[depth].level[m];
            wj[r] = sum;
            total += sum;
        }
        if (total > 0.0) {
            double u = rng.uniform() * total;
            std::size_t r = 0;
            while (r + 1 < others.size() && u >= wj[r]) u -= wj[r++];
            double s = t;
            auto& xs = points_[depth];
            sample_jump_point(walks_[depth], others[r], rng, s, xs);
            value += total * child(others[r], s, xs);
        }
    }
    return value;
}

double Recursion::sample_survival(double t, const double* x, DefaultState z, RandomStream& rng)
{
    if (t >= cfg_.maturity) return 1.0;
    DiscountWalk& w = buffer(0);
    walk(t, x, z.bits(), rng, w);
    return w.disc[w.steps];
}

NestedValueSource::NestedValueSource(const ModelParams& params, const Portfolio& portfolio,
                                     const EstimatorConfig& cfg, std::size_t samples)
    : params_(params), cfg_(cfg), samples_(std::max<std::size_t>(1, samples))
{
    for (const auto& c : portfolio.claims) specs_.push_back(CauchySpec{{1.0, 1.0, 1.0}, c});
    specs_.push_back(CauchySpec{{1.0, 1.0, 1.0}, portfolio.counterparty_cds});
}

double NestedValueSource::claim_value(std::size_t c, double t, std::span<const double> x, DefaultState z,
                                      RandomStream& rng) const
{
    Recursion rec(params_, cfg_);
    double acc = 0.0;
    for (std::size_t r = 0; r < samples_; ++r) acc += rec.sample_F(specs_.at(c), t, x.data(), z, rng);
    return acc / static_cast<double>(samples_);
}

double upsilon(const ModelParams& params, const Portfolio& portfolio, const ValueSource& values, double t,
               std::span<const double> x, DefaultState z, RandomStream& rng)
{
    const std::size_t cp = params.counterparty();
    const DefaultState zc = z.flip(cp);
    std::vector<double> xs(x.begin(), x.end());
    for (std::size_t i = 0; i < xs.size(); ++i)
        if (i != cp && !z.defaulted(i)) xs[i] += params.w(i, cp);
    double exposure = 0.0;
    for (std::size_t c = 0; c < portfolio.claims.size(); ++c) {
        const double b = portfolio.weights[c];
        if (b == 0.0 || portfolio.claims[c].k_at(zc)) continue;
        exposure += b * values.claim_value(c, t, xs, zc, rng);
    }
    return portfolio.counterparty_loss(zc) * std::max(exposure, 0.0);
}

Estimate estimate_F_direct(const ModelParams& params, const CauchySpec& spec, double t, std::span<const double> x,
                           DefaultState z, const EstimatorConfig& cfg)
{
    cfg.validate();
    check_point(params, t, x, z, cfg);
    if (t >= cfg.maturity) return {spec.terminal(z), 0.0, cfg.n_paths};
    const SimConfig sc = cfg.sim();
    return run_paths(cfg.n_paths, cfg.threads, [&] {
        return [&, path = MarketPath{}](std::size_t i) mutable {
            RandomStream rng(cfg.seed, stream_id(StreamDomain::market, i));
            simulate_market(params, sc, t, x, z, rng, path);
            return direct_integrand(spec, path);
        };
    });
}

Estimate estimate_F_recursive(const ModelParams& params, const CauchySpec& spec, double t,
                              std::span<const double> x, DefaultState z, const EstimatorConfig& cfg)
{
    cfg.validate();
    check_point(params, t, x, z, cfg);
    if (t >= cfg.maturity) return {spec.terminal(z), 0.0, cfg.n_paths};
    return run_paths(cfg.n_paths, cfg.threads, [&] {
        return [&, rec = Recursion(params, cfg)](std::size_t i) mutable {
            RandomStream rng(cfg.seed, stream_id(StreamDomain::recursion, i));
            return rec.sample_F(spec, t, x.data(), z, rng);
        };
    });
}

Estimate estimate_g(const ModelParams& params, const Portfolio& portfolio, double t, std::span<const double> x,
                    DefaultState z, const EstimatorConfig& cfg)
{
    cfg.validate();
    check_point(params, t, x, z, cfg);
    if (t >= cfg.maturity || z.defaulted(params.counterparty()) || portfolio.is_zero())
        return {0.0, 0.0, cfg.n_paths};
    const NestedValueSource values(params, portfolio, cfg, cfg.exposure_inner_paths);
    return run_paths(cfg.n_paths, cfg.threads, [&] {
        return [&, rec = Recursion(params, cfg)](std::size_t i) mutable {
            RandomStream rng(cfg.seed, stream_id(StreamDomain::g, i));
            return rec.sample_g(portfolio, values, t, x.data(), z, rng);
        };
    });
}

Estimate estimate_survival(const ModelParams& params, double t, std::span<const double> x, DefaultState z,
                           const EstimatorConfig& cfg)
{
    cfg.validate();
    check_point(params, t, x, z, cfg);
    return run_paths(cfg.n_paths, cfg.threads, [&] {
        return [&, rec = Recursion(params, cfg)](std::size_t i) mutable {
            RandomStream rng(cfg.seed, stream_id(StreamDomain::recursion, i));
            return rec.sample_survival(t, x.data(), z, rng);
        };
    });
}

std::vector<double> gradient_x(const PointEstimator& fn, double t, std::span<const double> x, DefaultState z,
                               const EstimatorConfig& cfg)
{
    std::vector<double> grad(x.size(), 0.0);
    EstimatorConfig other = cfg;
    if (!cfg.common_random_numbers) other.seed = splitmix64(cfg.seed);
    std::vector<double> up(x.begin(), x.end()), down(x.begin(), x.end());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (z.defaulted(i)) continue;
        const double bump = cfg.h_rel * x[i];
        up[i] = x[i] + bump;
        down[i] = x[i] - bump;
        grad[i] = (fn(t, up, z, cfg).value - fn(t, down, z, other).value) / (2.0 * bump);
        up[i] = down[i] = x[i];
    }
    return grad;
}

Estimate jump_difference(const ModelParams& params, const PointEstimator& fn, double t, std::span<const double> x,
                         DefaultState z, std::size_t j, const EstimatorConfig& cfg)
{
    if (j >= z.size()) throw std::out_of_range("jump_difference: name index out of range");
    if (z.defaulted(j)) throw std::invalid_argument("jump_difference: name " + std::to_string(j) + " already defaulted");
    std::vector<double> xj(x.begin(), x.end());
    for (std::size_t i = 0; i < xj.size(); ++i)
        if (i != j && !z.defaulted(i)) xj[i] += params.w(i, j);
    EstimatorConfig other = cfg;
    if (!cfg.common_random_numbers) other.seed = splitmix64(cfg.seed);
    const Estimate after = fn(t, xj, z.flip(j), cfg);
    const Estimate before = fn(t, x, z, other);
    return {after.value - before.value, std::hypot(after.std_error, before.std_error), after.n_paths};
}

}  // namespace cvahedge
