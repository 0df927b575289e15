#include "cvahedge/cva.hpp"

#include <algorithm>
#include <cmath>

#include "cvahedge/parallel.hpp"

namespace cvahedge {

double claim_price(const Portfolio& portfolio, const ValueSource& values, std::size_t c, double t,
                   std::span<const double> x, DefaultState z, double maturity, RandomStream& rng)
{
    if (c >= portfolio.claims.size()) throw std::out_of_range("claim_price: claim index out of range");
    const ClaimSpec& claim = portfolio.claims[c];
    if (t >= maturity || claim.k_at(z)) return 0.0;
    return values.claim_value(c, t, x, z, rng);
}

ExposureRecord exposure(const Portfolio& portfolio, const ValueSource& values, double t, std::span<const double> x,
                        DefaultState z, double maturity, RandomStream& rng)
{
    ExposureRecord r;
    r.time = t;
    r.prices.resize(portfolio.claims.size());
    for (std::size_t c = 0; c < portfolio.claims.size(); ++c) {
        r.prices[c] = claim_price(portfolio, values, c, t, x, z, maturity, rng);
        if (!portfolio.claims[c].k_at(z)) r.exposure += portfolio.weights[c] * r.prices[c];
    }
    r.positive_part = std::max(r.exposure, 0.0);
    return r;
}

double theta_stream(const ModelParams& params, const Portfolio& portfolio, const ValueSource& values,
                    const MarketPath& path, double maturity, RandomStream& rng)
{
    const std::size_t cp = params.counterparty();
    const double tau = path.default_times[cp];
    if (!(tau < maturity)) return 0.0;
    for (std::size_t k = 1; k < path.size(); ++k) {
        if (path.state(k).defaulted(cp) && !path.state(k - 1).defaulted(cp)) {
            const std::span<const double> x_left(path.x_left(k), path.n_names);
            return upsilon(params, portfolio, values, tau, x_left, path.state(k - 1), rng);
        }
    }
    // restarted after the counterparty default: nothing left to pay
    return 0.0;
}

double cva_sample(const ModelParams& params, const Portfolio& portfolio, const ValueSource& values, double t,
                  std::span<const double> x, DefaultState z, const SimConfig& sim, RandomStream& rng,
                  MarketPath& scratch)
{
    if (z.defaulted(params.counterparty()) || t >= sim.horizon) return 0.0;
    simulate_market(params, sim, t, x, z, rng, scratch);
    return theta_stream(params, portfolio, values, scratch, sim.horizon, rng);
}

Estimate cva_value(const ModelParams& params, const Portfolio& portfolio, const ValueSource& values, double t,
                   std::span<const double> x, DefaultState z, const EstimatorConfig& cfg)
{
    cfg.validate();
    if (z.defaulted(params.counterparty()) || t >= cfg.maturity || portfolio.is_zero())
        return {0.0, 0.0, cfg.n_paths};
    const SimConfig sim = cfg.sim();
    std::vector<double> samples(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t begin, std::size_t end) {
        MarketPath path;
        for (std::size_t i = begin; i < end; ++i) {
            RandomStream rng(cfg.seed, stream_id(StreamDomain::cva, i));
            samples[i] = cva_sample(params, portfolio, values, t, x, z, sim, rng, path);
        }
    });
    return summarize(samples);
}

Estimate cva_value(const ModelParams& params, const Portfolio& portfolio, double t, std::span<const double> x,
                   DefaultState z, const EstimatorConfig& cfg)
{
    const NestedValueSource values(params, portfolio, cfg, cfg.exposure_inner_paths);
    return cva_value(params, portfolio, values, t, x, z, cfg);
}

}  // namespace cvahedge
