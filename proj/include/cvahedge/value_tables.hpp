#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cvahedge/claims.hpp"
#include "cvahedge/fk_engine.hpp"
#include "cvahedge/model.hpp"

namespace cvahedge {

struct TableConfig {
    std::size_t grid_points = 12;  // per surviving intensity axis
    std::size_t paths = 512;       // diffusion paths per grid node
    std::size_t pilot_paths = 2000;
    double lower_quantile = 0.001;
    double upper_quantile = 0.999;

    void validate() const;
};

// Claim values F_c (alpha = (1,1,1)), the counterparty CDS and g, tabulated on
// the base time grid and a uniform intensity grid per default state. Built from
// the terminal state backwards; each node averages diffusion-only paths that
// integrate the child states' tables along the path. Values between nodes are
// multilinear in x (linear extrapolation outside) and linear in t.
class ValueTables : public ValueSource {
public:
    ValueTables(const ModelParams& params, const Portfolio& portfolio, const EstimatorConfig& cfg,
                const TableConfig& tcfg);

    std::size_t claim_count() const { return n_claims_; }
    std::size_t counterparty_index() const { return n_claims_; }
    std::size_t g_index() const { return n_claims_ + 1; }
    std::size_t functions() const { return n_claims_ + 2; }
    const std::vector<double>& times() const { return times_; }
    double lower(std::size_t i) const { return lo_[i]; }
    double upper(std::size_t i) const { return hi_[i]; }

    double value(std::size_t f, double t, std::span<const double> x, DefaultState z) const;
    // also fills d/dx (zero for defaulted names)
    double value(std::size_t f, double t, std::span<const double> x, DefaultState z, std::span<double> grad) const;

    double claim_value(std::size_t c, double t, std::span<const double> x, DefaultState z,
                       RandomStream& rng) const override;

private:
    struct StateTable {
        std::vector<std::size_t> dims;  // surviving names
        std::size_t nodes = 0;
        std::vector<double> data;       // [time][node][function]
        bool built = false;
    };

    void build_state(std::uint32_t bits);
    // all functions at time node k, interpolated in x
    void interpolate(std::uint32_t bits, std::size_t k, const double* x, double* out, double* grad) const;
    void node_point(const StateTable& st, std::size_t node, double* x) const;

    const ModelParams& params_;
    const Portfolio& portfolio_;
    EstimatorConfig cfg_;
    TableConfig tcfg_;
    std::size_t n_, n_claims_, nf_;
    std::vector<CauchySpec> specs_;
    std::vector<double> times_;
    double h_ = 0.0;
    std::vector<double> lo_, hi_, step_;
    std::vector<StateTable> tables_;
};

}  // namespace cvahedge
