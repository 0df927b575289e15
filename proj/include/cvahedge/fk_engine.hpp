#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cvahedge/claims.hpp"
#include "cvahedge/model.hpp"
#include "cvahedge/statistics.hpp"

namespace cvahedge {

class EstimatorError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CauchySpec {
    std::array<double, 3> alpha{1.0, 1.0, 1.0};
    ClaimSpec claim;

    double terminal(const DefaultState& z) const
    {
        const bool k = claim.k_at(z);
        return alpha[0] * claim.xi_at(z) * (k ? 0.0 : 1.0) + alpha[1] * claim.z_at(z) * (k ? 1.0 : 0.0);
    }
    // value once every name has defaulted
    double full_default(const DefaultState& z, double remaining) const
    {
        return terminal(z) + (claim.k_at(z) ? 0.0 : alpha[2] * claim.a_at(z) * remaining);
    }
};

struct EstimatorConfig {
    double maturity = 1.0;
    double dt = 0.01;
    std::size_t n_paths = 10000;
    std::size_t inner_paths = 1;            // samples per nested claim value
    std::size_t exposure_inner_paths = 64;  // samples per claim inside the positive part
    double h_rel = 0.01;
    std::size_t recursion_depth_cap = 64;
    bool common_random_numbers = true;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::size_t branch_limit = 4;  // enumerate all jump targets up to this many survivors
    std::size_t substep_cap = 32;
    Scheme scheme = Scheme::euler_full_truncation;

    void validate() const;
    SimConfig sim() const;
};

// stream id domains keep different estimators statistically independent
enum class StreamDomain : std::uint64_t {
    market = 1, recursion = 2, g = 3, oracle = 4, tables = 5, pilot = 6, hedge = 7, cva = 8, inner = 9
};
inline std::uint64_t stream_id(StreamDomain d, std::uint64_t index)
{
    return (static_cast<std::uint64_t>(d) << 48) ^ index;
}

// Source of claim values F_c(t,x,z) at alpha = (1,1,1). Claim index
// claims.size() denotes the counterparty CDS.
class ValueSource {
public:
    virtual ~ValueSource() = default;
    virtual double claim_value(std::size_t c, double t, std::span<const double> x, DefaultState z,
                               RandomStream& rng) const = 0;
};

// Nested Monte-Carlo values from the recursive estimator.
class NestedValueSource : public ValueSource {
public:
    NestedValueSource(const ModelParams& params, const Portfolio& portfolio, const EstimatorConfig& cfg,
                      std::size_t samples);
    double claim_value(std::size_t c, double t, std::span<const double> x, DefaultState z,
                       RandomStream& rng) const override;

private:
    const ModelParams& params_;
    std::vector<CauchySpec> specs_;
    EstimatorConfig cfg_;
    std::size_t samples_;
};

// Exposure weight {sum_i b_i (1-K_i(z')) F_i(t, x + w_cp, z')}_+ times L_cp(z')
// with z' the state after the counterparty default; x are pre-default intensities.
double upsilon(const ModelParams& params, const Portfolio& portfolio, const ValueSource& values, double t,
               std::span<const double> x, DefaultState z, RandomStream& rng);

Estimate estimate_F_direct(const ModelParams& params, const CauchySpec& spec, double t, std::span<const double> x,
                           DefaultState z, const EstimatorConfig& cfg);
Estimate estimate_F_recursive(const ModelParams& params, const CauchySpec& spec, double t,
                              std::span<const double> x, DefaultState z, const EstimatorConfig& cfg);
Estimate estimate_g(const ModelParams& params, const Portfolio& portfolio, double t, std::span<const double> x,
                    DefaultState z, const EstimatorConfig& cfg);
// E[exp(-int sum_{surviving} X)] over the diffusion-only paths
Estimate estimate_survival(const ModelParams& params, double t, std::span<const double> x, DefaultState z,
                           const EstimatorConfig& cfg);

using PointEstimator =
    std::function<Estimate(double t, std::span<const double> x, DefaultState z, const EstimatorConfig& cfg)>;

// central differences with bump h_rel * x_i, same seed on both sides
std::vector<double> gradient_x(const PointEstimator& fn, double t, std::span<const double> x, DefaultState z,
                               const EstimatorConfig& cfg);
// fn(t, x + w_j, z^j) - fn(t, x, z)
Estimate jump_difference(const ModelParams& params, const PointEstimator& fn, double t, std::span<const double> x,
                         DefaultState z, std::size_t j, const EstimatorConfig& cfg);

// Piecewise-exponential discounting over a simulated diffusion-only path.
// Within each step the intensities are taken at their mid value, so the
// integrals are exact when intensities are constant.
struct DiscountWalk {
    std::size_t n = 0;
    std::size_t steps = 0;
    double t0 = 0.0, h = 0.0;
    std::vector<double> x;      // (steps+1) x n
    std::vector<double> xbar;   // steps x n
    std::vector<double> lam;    // total surviving intensity per step
    std::vector<double> decay;  // exp(-lam h)
    std::vector<double> disc;   // D at grid points
    std::vector<double> level;  // int over step of D(s) ds

    double time(std::size_t m) const { return m == steps ? t0 + h * static_cast<double>(steps) : t0 + h * static_cast<double>(m); }
};

// fills `out` with a diffusion-only path of `steps` steps of size h from (t, x)
void make_walk(const Dynamics& dyn, double t, const double* x, std::uint32_t defaulted, std::size_t steps, double h,
               RandomStream& rng, DiscountWalk& out);

// (1 - e^-a)/a and (1 - e^-a (1+a))/a^2
double phi1(double a);
double phi2(double a);

class Recursion {
public:
    Recursion(const ModelParams& params, const EstimatorConfig& cfg);

    double sample_F(const CauchySpec& spec, double t, const double* x, DefaultState z, RandomStream& rng,
                    std::size_t depth = 0);
    double sample_g(const Portfolio& portfolio, const ValueSource& values, double t, const double* x,
                    DefaultState z, RandomStream& rng, std::size_t depth = 0);
    double sample_survival(double t, const double* x, DefaultState z, RandomStream& rng);

    void walk(double t, const double* x, std::uint32_t defaulted, RandomStream& rng, DiscountWalk& out) const;

private:
    DiscountWalk& buffer(std::size_t depth);
    // samples a time on the walk with density xbar_j D and returns total weight
    double sample_jump_point(const DiscountWalk& w, std::size_t j, RandomStream& rng, double& s,
                             std::vector<double>& xs) const;

    const ModelParams& params_;
    EstimatorConfig cfg_;
    Dynamics dyn_;
    std::vector<DiscountWalk> walks_;
    std::vector<std::vector<double>> points_;
    mutable std::vector<double> weights_;
};

}  // namespace cvahedge
