#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cvahedge/claims.hpp"
#include "cvahedge/fk_engine.hpp"
#include "cvahedge/model.hpp"
#include "cvahedge/random.hpp"

namespace testutil {

using namespace cvahedge;

// n names, one shared factor
inline ModelParams make_params(std::size_t n, double kappa, double nu, double sigma, double x0, double w = 0.0)
{
    ModelParams p;
    p.n_names = n;
    p.kappa.assign(n, kappa);
    p.nu.assign(n, nu);
    p.sigma = {sigma};
    p.contagion.assign(n, std::vector<double>(n, w));
    for (std::size_t i = 0; i < n; ++i) p.contagion[i][i] = 0.0;
    p.initial_intensity.assign(n, x0);
    return p;
}

// constant intensities: kappa = nu = sigma = w = 0
inline ModelParams constant_params(const std::vector<double>& x)
{
    ModelParams p = make_params(x.size(), 0.0, 0.0, 0.0, 0.0);
    p.initial_intensity = x;
    return p;
}

// Random CIR parameters satisfying the Feller condition, for property tests.
inline ModelParams random_params(RandomStream& rng, std::size_t n, std::size_t factors)
{
    ModelParams p;
    p.n_names = n;
    for (std::size_t i = 0; i < n; ++i) {
        p.kappa.push_back(0.02 + 0.08 * rng.uniform());
        p.nu.push_back(0.2 + 0.8 * rng.uniform());
        p.initial_intensity.push_back(0.02 + 0.3 * rng.uniform());
    }
    p.sigma.assign(factors, 0.0);
    p.vol_override.assign(n, std::vector<double>(factors, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        const double budget = std::sqrt(2.0 * p.kappa[i] / static_cast<double>(factors));
        for (std::size_t k = 0; k < factors; ++k) p.vol_override[i][k] = budget * rng.uniform();
    }
    p.contagion.assign(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j) p.contagion[i][j] = 0.3 * rng.uniform();
    return p;
}

inline EstimatorConfig small_config(double maturity, std::size_t paths, std::uint64_t seed = 1, double dt = 0.05)
{
    EstimatorConfig c;
    c.maturity = maturity;
    c.dt = dt;
    c.n_paths = paths;
    c.seed = seed;
    c.exposure_inner_paths = 16;
    return c;
}

inline double combined_se(const Estimate& a, const Estimate& b) { return std::hypot(a.std_error, b.std_error); }

}  // namespace testutil
