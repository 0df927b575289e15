#pragma once

#include <cstddef>
#include <cstdint>
#include <span>

#include "cvahedge/claims.hpp"
#include "cvahedge/model.hpp"
#include "cvahedge/statistics.hpp"

namespace cvahedge {

struct OracleConfig {
    double maturity = 1.0;
    // Monte-Carlo engine, used when some name has nonzero volatility
    double dt = 0.01;
    std::size_t n_paths = 20000;
    std::size_t inner_paths = 32;  // draws averaged inside the positive part
    std::uint64_t seed = 7;
    std::size_t threads = 1;
    // quadrature engine, used when every volatility is zero
    double outer_tol = 1e-10;
    double inner_tol = 1e-12;
    bool force_monte_carlo = false;
};

enum class OracleQuantity { claim, counterparty_cds, g };

// Single-name CDS on name 0, counterparty name 1. Quantities: the CDS value,
// the counterparty CDS value, and g.
Estimate cds_oracle(const ModelParams& params, const Portfolio& portfolio, OracleQuantity q, DefaultState z, double t,
                    std::span<const double> x, const OracleConfig& cfg);
// Single-name bond on name 0, counterparty name 1. Quantities: bond value, g.
Estimate bond_oracle(const ModelParams& params, const Portfolio& portfolio, OracleQuantity q, DefaultState z,
                     double t, std::span<const double> x, const OracleConfig& cfg);
// First-to-default on names 0 and 1, counterparty name 2. Quantities: FtD value, g.
Estimate ftd_oracle(const ModelParams& params, const Portfolio& portfolio, OracleQuantity q, DefaultState z,
                    double t, std::span<const double> x, const OracleConfig& cfg);

// dispatches on the portfolio's claim kind
Estimate portfolio_oracle(const ModelParams& params, const Portfolio& portfolio, OracleQuantity q, DefaultState z,
                          double t, std::span<const double> x, const OracleConfig& cfg);

bool oracle_supports(const Portfolio& portfolio);

// (L - eps/lambda)(1 - e^{-lambda tau}): single-name CDS with constant intensity
double cds_constant_intensity(double loss, double spread, double lambda, double tau);

}  // namespace cvahedge
