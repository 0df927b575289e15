#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "cvahedge/default_state.hpp"
#include "cvahedge/model.hpp"

namespace cvahedge {

using StateMap = std::function<double(const DefaultState&)>;

// Loss rate as a function of the post-default state: a constant or a dense
// table over all 2^n states.
struct LossMap {
    std::vector<double> table;   // empty means constant
    double constant = 0.6;

    double operator()(const DefaultState& z) const { return table.empty() ? constant : table.at(z.bits()); }
    static LossMap flat(double v) { return LossMap{{}, v}; }
};

enum class ClaimKind { cds, bond, first_to_default, custom };

// Defaultable claim (xi, a, Z, K) stored as dense tables over {0,1}^n.
struct ClaimSpec {
    ClaimKind kind = ClaimKind::custom;
    std::size_t n_names = 0;
    std::vector<std::size_t> references;
    std::vector<double> xi, a, zpay;
    std::vector<std::uint8_t> k;

    static ClaimSpec from_maps(std::size_t n_names, const StateMap& xi, const StateMap& a, const StateMap& zpay,
                               const std::function<bool(const DefaultState&)>& k);

    double xi_at(const DefaultState& z) const { return xi[z.bits()]; }
    double a_at(const DefaultState& z) const { return a[z.bits()]; }
    double z_at(const DefaultState& z) const { return zpay[z.bits()]; }
    bool k_at(const DefaultState& z) const { return k[z.bits()] != 0; }
    std::size_t states() const { return xi.size(); }

    // throws unless K is monotone in z
    void validate() const;
};

ClaimSpec make_cds(std::size_t n_names, std::size_t i, double spread, const LossMap& loss);
ClaimSpec make_bond(std::size_t n_names, std::size_t i, double coupon, const LossMap& loss);
// references are the reference names of the basket; losses has one map per reference
ClaimSpec make_first_to_default(std::size_t n_names, const std::vector<std::size_t>& references, double spread,
                                const std::vector<LossMap>& losses);
ClaimSpec make_zero_claim(std::size_t n_names);

// Cumulative dividend D(t) along a simulated path; xi only enters at t = T.
double dividend_cumulative(const ClaimSpec& claim, const MarketPath& path, double t);

struct Portfolio {
    std::vector<ClaimSpec> claims;   // traded claims
    std::vector<double> weights;     // b_i
    ClaimSpec counterparty_cds;      // hedge instrument on the last name
    LossMap counterparty_loss;       // L of the counterparty
    double counterparty_spread = 0.0;

    std::size_t n_names() const { return counterparty_cds.n_names; }
    std::size_t counterparty() const { return n_names() - 1; }
    bool is_zero() const;

    // K of distinct claims must not flip on the same default event
    void validate() const;
};

Portfolio make_portfolio(std::vector<ClaimSpec> claims, std::vector<double> weights, double counterparty_spread,
                         const LossMap& counterparty_loss);

// True when no two claims (including the counterparty leg) trigger on the
// same default event of the path.
bool triggers_separated(const Portfolio& portfolio, const MarketPath& path);

std::string to_string(ClaimKind kind);

}  // namespace cvahedge
