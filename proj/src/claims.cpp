#include "cvahedge/claims.hpp"

#include <stdexcept>

namespace cvahedge {

std::string to_string(ClaimKind kind)
{
    switch (kind) {
    case ClaimKind::cds: return "cds";
    case ClaimKind::bond: return "bond";
    case ClaimKind::first_to_default: return "ftd";
    default: return "custom";
    }
}

ClaimSpec ClaimSpec::from_maps(std::size_t n_names, const StateMap& xi, const StateMap& a, const StateMap& zpay,
                               const std::function<bool(const DefaultState&)>& k)
{
    if (n_names == 0 || n_names > max_names) throw std::invalid_argument("claim: bad name count");
    ClaimSpec c;
    c.n_names = n_names;
    const std::size_t states = std::size_t{1} << n_names;
    c.xi.resize(states);
    c.a.resize(states);
    c.zpay.resize(states);
    c.k.resize(states);
    for (std::size_t b = 0; b < states; ++b) {
        const DefaultState z(n_names, static_cast<std::uint32_t>(b));
        c.xi[b] = xi(z);
        c.a[b] = a(z);
        c.zpay[b] = zpay(z);
        c.k[b] = k(z) ? 1 : 0;
    }
    c.validate();
    return c;
}

void ClaimSpec::validate() const
{
    const std::size_t states = std::size_t{1} << n_names;
    if (xi.size() != states || a.size() != states || zpay.size() != states || k.size() != states)
        throw std::invalid_argument("claim: tables must cover all 2^n states");
    // monotone iff no single flip 0 -> 1 lowers K
    for (std::size_t b = 0; b < states; ++b)
        for (std::size_t j = 0; j < n_names; ++j)
            if (!((b >> j) & 1u) && k[b] > k[b | (std::size_t{1} << j)])
                throw std::invalid_argument("claim: trigger indicator K is not monotone");
}

namespace {

void check_loss(const LossMap& loss, std::size_t n_names, const char* what)
{
    const std::size_t states = std::size_t{1} << n_names;
    if (!loss.table.empty() && loss.table.size() != states)
        throw std::invalid_argument(std::string(what) + ": loss table must have 2^n entries");
    for (std::size_t b = 0; b < states; ++b) {
        const double l = loss(DefaultState(n_names, static_cast<std::uint32_t>(b)));
        if (!(l > 0.0 && l <= 1.0)) throw std::invalid_argument(std::string(what) + ": loss rate must be in (0,1]");
    }
}

void check_name(std::size_t n_names, std::size_t i, const char* what)
{
    if (i >= n_names) throw std::out_of_range(std::string(what) + ": name index out of range");
}

}  // namespace

ClaimSpec make_cds(std::size_t n_names, std::size_t i, double spread, const LossMap& loss)
{
    check_name(n_names, i, "make_cds");
    check_loss(loss, n_names, "make_cds");
    if (!(spread > 0.0)) throw std::invalid_argument("make_cds: spread must be > 0");
    auto c = ClaimSpec::from_maps(
        n_names, [](const DefaultState&) { return 0.0; }, [spread](const DefaultState&) { return -spread; },
        [loss](const DefaultState& z) { return loss(z); }, [i](const DefaultState& z) { return z.defaulted(i); });
    c.kind = ClaimKind::cds;
    c.references = {i};
    return c;
}

ClaimSpec make_bond(std::size_t n_names, std::size_t i, double coupon, const LossMap& loss)
{
    check_name(n_names, i, "make_bond");
    check_loss(loss, n_names, "make_bond");
    if (!(coupon > 0.0)) throw std::invalid_argument("make_bond: coupon must be > 0");
    auto c = ClaimSpec::from_maps(
        n_names, [](const DefaultState&) { return 1.0; }, [coupon](const DefaultState&) { return coupon; },
        [loss](const DefaultState& z) { return 1.0 - loss(z); },
        [i](const DefaultState& z) { return z.defaulted(i); });
    c.kind = ClaimKind::bond;
    c.references = {i};
    return c;
}

ClaimSpec make_first_to_default(std::size_t n_names, const std::vector<std::size_t>& references, double spread,
                                const std::vector<LossMap>& losses)
{
    if (references.empty()) throw std::invalid_argument("make_first_to_default: empty basket");
    if (losses.size() != references.size())
        throw std::invalid_argument("make_first_to_default: one loss map per reference name");
    if (!(spread > 0.0)) throw std::invalid_argument("make_first_to_default: spread must be > 0");
    for (std::size_t r = 0; r < references.size(); ++r) {
        check_name(n_names, references[r], "make_first_to_default");
        check_loss(losses[r], n_names, "make_first_to_default");
    }
    auto hit = [references](const DefaultState& z) {
        for (auto i : references)
            if (z.defaulted(i)) return true;
        return false;
    };
    auto c = ClaimSpec::from_maps(
        n_names, [](const DefaultState&) { return 0.0; }, [spread](const DefaultState&) { return -spread; },
        [references, losses](const DefaultState& z) {
            double s = 0.0;
            for (std::size_t r = 0; r < references.size(); ++r)
                if (z.defaulted(references[r])) s += losses[r](z);
            return s;
        },
        hit);
    c.kind = ClaimKind::first_to_default;
    c.references = references;
    return c;
}

ClaimSpec make_zero_claim(std::size_t n_names)
{
    auto zero = [](const DefaultState&) { return 0.0; };
    return ClaimSpec::from_maps(n_names, zero, zero, zero, [](const DefaultState&) { return false; });
}

double dividend_cumulative(const ClaimSpec& claim, const MarketPath& path, double t)
{
    if (path.size() == 0) throw std::invalid_argument("dividend_cumulative: empty path");
    const double t0 = path.times.front();
    const double horizon = path.times.back();
    if (t < t0 || t > horizon) throw std::out_of_range("dividend_cumulative: t outside the path horizon");
    double d = 0.0;
    for (std::size_t m = 0; m + 1 < path.size(); ++m) {
        const double lo = path.times[m];
        if (lo >= t) break;
        const double hi = std::min(path.times[m + 1], t);
        const DefaultState z = path.state(m);
        if (!claim.k_at(z)) d += claim.a_at(z) * (hi - lo);
        const DefaultState next = path.state(m + 1);
        if (path.times[m + 1] <= t && !claim.k_at(z) && claim.k_at(next)) d += claim.z_at(next);
    }
    if (t >= horizon) {
        const DefaultState z = path.state(path.size() - 1);
        if (!claim.k_at(z)) d += claim.xi_at(z);
    }
    return d;
}

bool Portfolio::is_zero() const
{
    for (double b : weights)
        if (b != 0.0) return false;
    return true;
}

void Portfolio::validate() const
{
    if (claims.size() != weights.size()) throw std::invalid_argument("portfolio: one weight per claim");
    const std::size_t n = n_names();
    if (n < 1) throw std::invalid_argument("portfolio: missing counterparty leg");
    for (const auto& c : claims)
        if (c.n_names != n) throw std::invalid_argument("portfolio: claims disagree on the number of names");
    // a single default j must not flip two triggers
    const std::size_t states = std::size_t{1} << n;
    std::vector<const ClaimSpec*> all;
    for (const auto& c : claims) all.push_back(&c);
    all.push_back(&counterparty_cds);
    for (std::size_t b = 0; b < states; ++b) {
        for (std::size_t j = 0; j < n; ++j) {
            if ((b >> j) & 1u) continue;
            const std::size_t nb = b | (std::size_t{1} << j);
            int flips = 0;
            for (const auto* c : all) flips += c->k[b] != c->k[nb];
            if (flips > 1)
                throw std::invalid_argument("portfolio: default of name " + std::to_string(j) +
                                            " triggers more than one claim");
        }
    }
}

Portfolio make_portfolio(std::vector<ClaimSpec> claims, std::vector<double> weights, double counterparty_spread,
                         const LossMap& counterparty_loss)
{
    if (claims.empty()) throw std::invalid_argument("portfolio: needs at least one claim");
    Portfolio p;
    const std::size_t n = claims.front().n_names;
    p.counterparty_cds = make_cds(n, n - 1, counterparty_spread, counterparty_loss);
    p.counterparty_loss = counterparty_loss;
    p.counterparty_spread = counterparty_spread;
    p.claims = std::move(claims);
    p.weights = std::move(weights);
    p.validate();
    return p;
}

bool triggers_separated(const Portfolio& portfolio, const MarketPath& path)
{
    for (std::size_t m = 0; m + 1 < path.size(); ++m) {
        const DefaultState a = path.state(m), b = path.state(m + 1);
        int flips = portfolio.counterparty_cds.k_at(a) != portfolio.counterparty_cds.k_at(b);
        for (const auto& c : portfolio.claims) flips += c.k_at(a) != c.k_at(b);
        if (flips > 1) return false;
    }
    return true;
}

}  // namespace cvahedge
