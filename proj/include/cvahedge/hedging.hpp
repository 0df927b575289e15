#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cvahedge/claims.hpp"
#include "cvahedge/fk_engine.hpp"
#include "cvahedge/model.hpp"
#include "cvahedge/statistics.hpp"
#include "cvahedge/value_tables.hpp"

namespace cvahedge {

// Everything the GKW ratio needs at one state (t, x, z) with z_cp = 0.
struct HedgeInputs {
    double g = 0.0;
    std::vector<double> grad_g;        // D_x g
    double f_cds = 0.0;                // counterparty CDS value
    std::vector<double> grad_cds;      // V^cds = D_x F^cds
    std::vector<double> cds_jump;      // G^cds_{cp,j}, zero for defaulted j
    std::vector<double> g_jump;        // g(t, x + w_j, z^j) - g(t, x, z), j != cp
    double upsilon = 0.0;              // exposure weight at a counterparty default
};

struct HedgeTerms {
    double u1 = 0.0, u2 = 0.0, u3 = 0.0, phi = 0.0, theta = 0.0;
    bool guarded = false;  // phi below the division guard, theta forced to 0
};

constexpr double phi_guard = 1e-12;

HedgeInputs hedge_inputs(const ModelParams& params, const Portfolio& portfolio, const ValueTables& tables, double t,
                         std::span<const double> x, DefaultState z);
// point evaluation through the Monte-Carlo estimators (finite-difference
// gradients and jump differences under common random numbers)
HedgeInputs hedge_inputs_mc(const ModelParams& params, const Portfolio& portfolio, double t,
                            std::span<const double> x, DefaultState z, const EstimatorConfig& cfg);

// sigma_ik(x) = vol(i,k) sqrt(x_i) on surviving names
std::vector<double> diffusion_loading(const ModelParams& params, const std::vector<double>& grad,
                                      std::span<const double> x, DefaultState z);

double phi(const ModelParams& params, const HedgeInputs& in, std::span<const double> x, DefaultState z);
HedgeTerms u_terms(const ModelParams& params, const HedgeInputs& in, std::span<const double> x, DefaultState z);
// throws EstimatorError when phi falls below the guard; refuses z_cp = 1 and t >= T
double theta_gkw(const ModelParams& params, const HedgeInputs& in, double t, std::span<const double> x,
                 DefaultState z, double maturity);
// guarded version used along paths
HedgeTerms hedge_terms(const ModelParams& params, const HedgeInputs& in, std::span<const double> x, DefaultState z);
// U terms and phi averaged over `points` midpoints of [t0, t1] along the mean
// pre-default intensity path; theta is the ratio of the averages, the holding
// kept constant over the rebalancing bucket. points <= 1 evaluates at t0 only.
HedgeTerms bucket_terms(const ModelParams& params, const Portfolio& portfolio, const ValueTables& tables, double t0,
                        double t1, std::span<const double> x, DefaultState z, std::size_t points);

struct HedgeRow {
    double time = 0.0, theta = 0.0, eta = 0.0, value = 0.0;
    double u1 = 0.0, u2 = 0.0, u3 = 0.0, phi = 0.0, dC = 0.0, dA = 0.0;
    bool guarded = false;
};

struct HedgeReport {
    std::vector<HedgeRow> rows;
    // per base-grid bucket, zero after the stopping time
    std::vector<double> dV, dY, theta_dY;
    double theta_paid = 0.0;     // Theta(T ^ tau_cp)
    double final_value = 0.0;    // V - Theta at T ^ tau_cp
    bool counterparty_default = false;
};

struct HedgeConfig {
    std::size_t value_paths = 8;   // restarted paths per CVA value along the path
    std::size_t min_paths = 10000;
    std::size_t keep_rows = 16;    // paths whose per-step rows are retained
    std::size_t bucket_points = 4; // midpoints averaged per rebalancing bucket
};

// Replays the risk-minimizing strategy along one market path. V(t) is the
// realized stream plus a restarted-path CVA estimate; theta uses the tables.
HedgeReport full_strategy(const ModelParams& params, const Portfolio& portfolio, const ValueTables& tables,
                          const MarketPath& path, const EstimatorConfig& cfg, const HedgeConfig& hcfg,
                          std::uint64_t path_index);

struct ProbeResult {
    double scale = 0.0;
    double risk = 0.0;        // R for scale * theta
    double excess = 0.0;      // R(scale) - R(1)
    double excess_se = 0.0;
    bool dominated = false;   // R(1) <= R(scale) + 3 SE
};

struct GkwSummary {
    std::size_t n_paths = 0;
    std::vector<double> times;
    std::vector<Estimate> mean_cost;        // per bucket dC
    std::vector<Estimate> cumulative_cost;  // C(t_b) - C(0)
    std::vector<Estimate> covariance;       // cov(dA, dY) per bucket
    Estimate risk;                          // R(theta_gkw)
    Estimate mean_residual;                 // A(T ^ tau)
    Estimate mean_theta_paid;
    double theta_variance = 0.0;
    std::vector<ProbeResult> probes;
    double max_final_value = 0.0;
    std::size_t guarded_steps = 0;

    bool zero_achieving() const { return max_final_value == 0.0; }
    bool cost_martingale(double k = 3.0) const;
    bool orthogonal(double k = 3.0) const;
    bool risk_dominant() const;
};

GkwSummary gkw_diagnostics(const std::vector<HedgeReport>& reports, const std::vector<double>& times,
                           const HedgeConfig& hcfg, const std::vector<double>& probe_scales = {0.0, 0.5, 0.9, 1.1, 2.0});

// simulates n market paths and replays the strategy on each
std::vector<HedgeReport> hedge_ensemble(const ModelParams& params, const Portfolio& portfolio,
                                        const ValueTables& tables, const EstimatorConfig& cfg,
                                        const HedgeConfig& hcfg, std::size_t n_paths);

}  // namespace cvahedge
