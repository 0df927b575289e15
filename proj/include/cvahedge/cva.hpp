#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cvahedge/claims.hpp"
#include "cvahedge/fk_engine.hpp"
#include "cvahedge/model.hpp"
#include "cvahedge/statistics.hpp"

namespace cvahedge {

struct ExposureRecord {
    double time = 0.0;
    std::vector<double> prices;  // S_i(t,T) per traded claim
    double exposure = 0.0;       // sum_i b_i (1 - K_i) S_i
    double positive_part = 0.0;
};

// S = F - Z K before maturity, 0 at maturity and after the trigger
double claim_price(const Portfolio& portfolio, const ValueSource& values, std::size_t c, double t,
                   std::span<const double> x, DefaultState z, double maturity, RandomStream& rng);

ExposureRecord exposure(const Portfolio& portfolio, const ValueSource& values, double t, std::span<const double> x,
                        DefaultState z, double maturity, RandomStream& rng);

// Theta(T ^ tau_cp) along a simulated path; zero unless the counterparty
// defaults strictly before the maturity
double theta_stream(const ModelParams& params, const Portfolio& portfolio, const ValueSource& values,
                    const MarketPath& path, double maturity, RandomStream& rng);

// remaining CVA at (t, x, z): mean of theta_stream over restarted paths
Estimate cva_value(const ModelParams& params, const Portfolio& portfolio, const ValueSource& values, double t,
                   std::span<const double> x, DefaultState z, const EstimatorConfig& cfg);
// same with nested Monte-Carlo claim values
Estimate cva_value(const ModelParams& params, const Portfolio& portfolio, double t, std::span<const double> x,
                   DefaultState z, const EstimatorConfig& cfg);

// one restarted-path draw of the remaining stream, for callers running
// their own inner loops
double cva_sample(const ModelParams& params, const Portfolio& portfolio, const ValueSource& values, double t,
                  std::span<const double> x, DefaultState z, const SimConfig& sim, RandomStream& rng,
                  MarketPath& scratch);

}  // namespace cvahedge
