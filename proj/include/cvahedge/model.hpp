#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvahedge/default_state.hpp"
#include "cvahedge/random.hpp"

namespace cvahedge {

constexpr double intensity_floor = 1e-12;

class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Scheme { euler_full_truncation, exact_where_available };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

// dX_i = (kappa_i - nu_i X_i) dt + sum_k vol(i,k) sqrt(X_i) dW_k + sum_j w[i][j] dH_j
struct ModelParams {
    std::size_t n_names = 0;
    std::vector<double> kappa;
    std::vector<double> nu;
    std::vector<double> sigma;                       // shared loadings, one per factor
    std::vector<std::vector<double>> vol_override;   // optional n_names x K
    std::vector<std::vector<double>> contagion;      // w[i][j]: jump of i when j defaults
    std::vector<double> initial_intensity;

    std::size_t n_factors() const { return sigma.size(); }
    std::size_t counterparty() const { return n_names - 1; }
    double vol(std::size_t i, std::size_t k) const
    {
        return vol_override.empty() ? sigma[k] : vol_override[i][k];
    }
    double total_variance(std::size_t i) const;
    double w(std::size_t i, std::size_t j) const { return contagion[i][j]; }

    // throws std::invalid_argument naming the offending field
    void validate() const;
};

std::vector<bool> feller_check(const ModelParams& params);

struct SimConfig {
    double horizon = 1.0;
    double dt = 0.01;
    std::size_t n_paths = 10000;
    std::uint64_t seed = 1;
    std::size_t substep_cap = 32;
    Scheme scheme = Scheme::euler_full_truncation;
    std::size_t threads = 1;

    void validate() const;
};

// number of uniform steps covering [t, horizon] with size at most dt
std::size_t step_count(double t, double horizon, double dt);

double compensator_increment(double x_begin, double x_end, double dt);
inline double compensator_increment(double x, double dt) { return compensator_increment(x, x, dt); }

// Flattened coefficients for the inner loops.
class Dynamics {
public:
    Dynamics(const ModelParams& params, Scheme scheme);

    std::size_t n() const { return n_; }
    std::size_t factors() const { return k_; }
    double w(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }

    // advance the names whose bit is clear in `defaulted` over a step h
    void step(double* x, std::uint32_t defaulted, double h, const double* dw) const;

private:
    std::size_t n_, k_;
    std::vector<double> kappa_, nu_, vol_, w_;
    std::vector<char> exact_;
};

struct Trajectory {
    std::size_t n_names = 0;
    std::vector<double> times;
    std::vector<double> values;   // row m holds X(times[m])
    double at(std::size_t m, std::size_t i) const { return values[m * n_names + i]; }
};

Trajectory simulate_diffusion_only(const ModelParams& params, double t, std::span<const double> x, double horizon,
                                   const SimConfig& config, RandomStream& rng);

struct MarketPath {
    std::size_t n_names = 0;
    std::size_t n_factors = 0;
    std::vector<double> times;                   // base grid plus inserted default times
    std::vector<double> intensities;             // X(t_m), post jump
    std::vector<double> left_intensities;        // X(t_m-)
    std::vector<std::uint32_t> states;           // H(t_m) as bits
    std::vector<double> brownian;                // increments over [t_m, t_m+1], n_factors per interval
    std::vector<double> compensator_increments;  // int X_i (1 - H_i) over [t_m, t_m+1], n_names per interval
    std::vector<double> compensators;            // cumulative, n_names per point
    std::vector<double> default_times;           // +inf when no default by the horizon

    std::size_t size() const { return times.size(); }
    const double* x(std::size_t m) const { return intensities.data() + m * n_names; }
    const double* x_left(std::size_t m) const { return left_intensities.data() + m * n_names; }
    DefaultState state(std::size_t m) const { return DefaultState(n_names, states[m]); }
    double compensator(std::size_t m, std::size_t i) const { return compensators[m * n_names + i]; }
    double compensator_increment(std::size_t m, std::size_t i) const
    {
        return compensator_increments[m * n_names + i];
    }
    const double* dw(std::size_t m) const { return brownian.data() + m * n_factors; }
    bool defaulted_by(std::size_t i, double t) const { return default_times[i] <= t; }
};

MarketPath simulate_market(const ModelParams& params, const SimConfig& config, RandomStream& rng);

// restarted at (t, x, z); defaulted names start frozen
void simulate_market(const ModelParams& params, const SimConfig& config, double t, std::span<const double> x,
                     DefaultState z, RandomStream& rng, MarketPath& out);

double squared_intensity_integral(const MarketPath& path);

constexpr double never = std::numeric_limits<double>::infinity();

}  // namespace cvahedge
