#include "cvahedge/closed_forms.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cvahedge/fk_engine.hpp"
#include "cvahedge/parallel.hpp"

namespace cvahedge {

namespace {

using Vec = std::array<double, 3>;

struct Model {
    std::size_t n;
    Vec kappa{}, nu{};
    std::array<Vec, 3> w{};
};

Model model_of(const ModelParams& p)
{
    Model m{p.n_names};
    for (std::size_t i = 0; i < p.n_names; ++i) {
        m.kappa[i] = p.kappa[i];
        m.nu[i] = p.nu[i];
        for (std::size_t j = 0; j < p.n_names; ++j) m.w[i][j] = p.w(i, j);
    }
    return m;
}

// x + w_j on the names still alive after j defaults
Vec shifted(const Model& m, const Vec& x, std::uint32_t alive, std::size_t j)
{
    Vec out = x;
    for (std::size_t i = 0; i < m.n; ++i)
        if (i != j && ((alive >> i) & 1u)) out[i] += m.w[i][j];
    return out;
}

// Exact paths of dx = (kappa - nu x) dt and nested adaptive quadrature.
class QuadratureEngine {
public:
    QuadratureEngine(const ModelParams& p, const OracleConfig& cfg) : m_(model_of(p)), cfg_(cfg) {}

    double maturity() const { return cfg_.maturity; }
    const Model& model() const { return m_; }

    // E[c D(T) + int_t^T f(s, X(s)) D(s) ds] with D the discount over `alive`
    template <class F>
    double expect(double t, const Vec& x, std::uint32_t alive, double c, F&& f)
    {
        const double T = cfg_.maturity;
        if (t >= T) return c;
        auto path = [&](double s, Vec& xs) {
            double integral = 0.0;
            const double u = s - t;
            for (std::size_t i = 0; i < m_.n; ++i) {
                const double k = m_.kappa[i], v = m_.nu[i];
                if (v > 0.0) {
                    const double mean = k / v;
                    xs[i] = mean + (x[i] - mean) * std::exp(-v * u);
                    if ((alive >> i) & 1u) integral += mean * u - (x[i] - mean) * std::expm1(-v * u) / v;
                } else {
                    xs[i] = x[i] + k * u;
                    if ((alive >> i) & 1u) integral += x[i] * u + 0.5 * k * u * u;
                }
            }
            return std::exp(-integral);
        };
        Vec xs{};
        double value = c == 0.0 ? 0.0 : c * path(T, xs);
        const double tol = depth_ == 0 ? cfg_.outer_tol : cfg_.inner_tol;
        ++depth_;
        auto integrand = [&](double s) {
            Vec y{};
            const double d = path(s, y);
            return f(s, y) * d;
        };
        const double integral = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(integrand, t, T, 15, tol);
        --depth_;
        return value + integral;
    }

    template <class F>
    double positive(F&& f)
    {
        return std::max(f(), 0.0);
    }

private:
    Model m_;
    OracleConfig cfg_;
    int depth_ = 0;
};

// One unbiased draw per call: Euler path of the diffusion-only process, one
// uniformly sampled time for the integral term.
class MonteCarloEngine {
public:
    MonteCarloEngine(const ModelParams& p, const OracleConfig& cfg, RandomStream& rng)
        : m_(model_of(p)), cfg_(cfg), dyn_(p, Scheme::euler_full_truncation), rng_(rng), nk_(p.n_factors())
    {
    }

    double maturity() const { return cfg_.maturity; }
    const Model& model() const { return m_; }

    template <class F>
    double expect(double t, const Vec& x, std::uint32_t alive, double c, F&& f)
    {
        const double T = cfg_.maturity;
        if (t >= T) return c;
        const std::size_t steps = step_count(t, T, cfg_.dt);
        const double h = (T - t) / static_cast<double>(steps);
        const double s = t + (T - t) * rng_.uniform();
        const std::size_t hit = std::min(steps - 1, static_cast<std::size_t>((s - t) / h));
        const std::uint32_t dead = ~alive;
        Vec cur = x, next{}, at_s{};
        double log_d = 0.0, log_d_s = 0.0;
        std::vector<double> dw(nk_);
        const double sq = std::sqrt(h);
        for (std::size_t k = 0; k < steps; ++k) {
            for (auto& d : dw) d = sq * rng_.normal();
            next = cur;
            dyn_.step(next.data(), dead & ((1u << m_.n) - 1u), h, dw.data());
            double lam = 0.0;
            for (std::size_t i = 0; i < m_.n; ++i)
                if ((alive >> i) & 1u) lam += 0.5 * (cur[i] + next[i]);
            if (k == hit) {
                const double frac = std::clamp((s - (t + static_cast<double>(k) * h)) / h, 0.0, 1.0);
                for (std::size_t i = 0; i < m_.n; ++i) at_s[i] = cur[i] + frac * (next[i] - cur[i]);
                log_d_s = log_d - frac * h * lam;
            }
            log_d -= h * lam;
            cur = next;
        }
        const double terminal = c == 0.0 ? 0.0 : c * std::exp(log_d);
        return terminal + (T - t) * f(s, at_s) * std::exp(log_d_s);
    }

    template <class F>
    double positive(F&& f)
    {
        double acc = 0.0;
        for (std::size_t r = 0; r < cfg_.inner_paths; ++r) acc += f();
        return std::max(acc / static_cast<double>(cfg_.inner_paths), 0.0);
    }

private:
    Model m_;
    OracleConfig cfg_;
    Dynamics dyn_;
    RandomStream& rng_;
    std::size_t nk_;
};

// Payoff data read from the claim tables.
struct Book {
    const ClaimSpec* claim;
    const Portfolio* portfolio;
    double b1;
    double L1(std::uint32_t z) const { return claim->z_at(DefaultState(claim->n_names, z)); }
    double Z(std::uint32_t z) const { return claim->z_at(DefaultState(claim->n_names, z)); }
    double a(std::uint32_t z) const { return claim->a_at(DefaultState(claim->n_names, z)); }
    double Lc(std::uint32_t z) const { return portfolio->counterparty_loss(DefaultState(claim->n_names, z)); }
    double eps_c() const { return portfolio->counterparty_spread; }
};

// ---- single-name CDS, names (reference, counterparty); bit 0 = reference

template <class E>
double cds_F1(E& e, const Book& bk, std::uint32_t z, double t, const Vec& x)
{
    const auto& m = e.model();
    const double eps = -bk.a(0);
    switch (z) {
    case 0b11: return bk.L1(0b11);
    case 0b01: return e.expect(t, x, 0b10, bk.L1(0b01), [&](double, const Vec& y) { return bk.L1(0b01) * y[1]; });
    case 0b10:
        return e.expect(t, x, 0b01, 0.0, [&](double, const Vec& y) { return bk.L1(0b11) * y[0] - eps; });
    default:
        return e.expect(t, x, 0b11, 0.0, [&](double s, const Vec& y) {
            return cds_F1(e, bk, 0b01, s, shifted(m, y, 0b11, 0)) * y[0] +
                   cds_F1(e, bk, 0b10, s, shifted(m, y, 0b11, 1)) * y[1] - eps;
        });
    }
}

template <class E>
double cds_F2(E& e, const Book& bk, std::uint32_t z, double t, const Vec& x)
{
    const auto& m = e.model();
    const double eps = bk.eps_c();
    switch (z) {
    case 0b11: return bk.Lc(0b11);
    case 0b01:
        return e.expect(t, x, 0b10, 0.0, [&](double, const Vec& y) { return bk.Lc(0b11) * y[1] - eps; });
    case 0b10: return e.expect(t, x, 0b01, bk.Lc(0b10), [&](double, const Vec& y) { return bk.Lc(0b10) * y[0]; });
    default:
        return e.expect(t, x, 0b11, 0.0, [&](double s, const Vec& y) {
            return cds_F2(e, bk, 0b01, s, shifted(m, y, 0b11, 0)) * y[0] +
                   cds_F2(e, bk, 0b10, s, shifted(m, y, 0b11, 1)) * y[1] - eps;
        });
    }
}

template <class E, class F1>
double single_name_g(E& e, const Book& bk, std::uint32_t z, double t, const Vec& x, F1&& f1)
{
    if (z != 0) return 0.0;
    const auto& m = e.model();
    return e.expect(t, x, 0b11, 0.0, [&](double s, const Vec& y) {
        const Vec post = shifted(m, y, 0b11, 1);
        const double exposure = e.positive([&] { return bk.b1 * f1(0b10, s, post); });
        return bk.Lc(0b10) * y[1] * exposure;
    });
}

// ---- single-name bond

template <class E>
double bond_F1(E& e, const Book& bk, std::uint32_t z, double t, const Vec& x)
{
    const auto& m = e.model();
    const double eps = bk.a(0);
    switch (z) {
    case 0b11: return bk.Z(0b11);
    case 0b01: {
        const double r = bk.Z(0b01);
        return e.expect(t, x, 0b10, r, [&](double, const Vec& y) { return r * y[1]; });
    }
    case 0b10:
        return e.expect(t, x, 0b01, 1.0, [&](double, const Vec& y) { return bk.Z(0b11) * y[0] + eps; });
    default:
        return e.expect(t, x, 0b11, 1.0, [&](double s, const Vec& y) {
            return bond_F1(e, bk, 0b01, s, shifted(m, y, 0b11, 0)) * y[0] +
                   bond_F1(e, bk, 0b10, s, shifted(m, y, 0b11, 1)) * y[1] + eps;
        });
    }
}

// ---- first-to-default on names 0,1; counterparty is name 2 (bit 2)

template <class E>
double ftd_F1(E& e, const Book& bk, std::uint32_t z, double t, const Vec& x)
{
    const auto& m = e.model();
    const double a = bk.a(0);
    auto F = [&](std::uint32_t zz, double s, const Vec& y) { return ftd_F1(e, bk, zz, s, y); };
    switch (z) {
    case 0b111: return bk.Z(0b111);
    case 0b011:
        return e.expect(t, x, 0b100, bk.Z(0b011), [&](double, const Vec& y) { return bk.Z(0b011) * y[2]; });
    case 0b101:
        return e.expect(t, x, 0b010, bk.Z(0b101), [&](double, const Vec& y) { return bk.Z(0b101) * y[1]; });
    case 0b110:
        return e.expect(t, x, 0b001, bk.Z(0b110), [&](double, const Vec& y) { return bk.Z(0b110) * y[0]; });
    case 0b001:
        return e.expect(t, x, 0b110, bk.Z(0b001), [&](double s, const Vec& y) {
            return y[1] * (F(0b011, s, shifted(m, y, 0b110, 1)) - (bk.Z(0b011) - bk.Z(0b001))) +
                   y[2] * (F(0b101, s, shifted(m, y, 0b110, 2)) - (bk.Z(0b101) - bk.Z(0b001)));
        });
    case 0b010:
        return e.expect(t, x, 0b101, bk.Z(0b010), [&](double s, const Vec& y) {
            return y[0] * (F(0b011, s, shifted(m, y, 0b101, 0)) - (bk.Z(0b011) - bk.Z(0b010))) +
                   y[2] * (F(0b110, s, shifted(m, y, 0b101, 2)) - (bk.Z(0b110) - bk.Z(0b010)));
        });
    case 0b100:
        return e.expect(t, x, 0b011, 0.0, [&](double s, const Vec& y) {
            return y[0] * F(0b101, s, shifted(m, y, 0b011, 0)) + y[1] * F(0b110, s, shifted(m, y, 0b011, 1)) + a;
        });
    default:
        return e.expect(t, x, 0b111, 0.0, [&](double s, const Vec& y) {
            return y[0] * F(0b001, s, shifted(m, y, 0b111, 0)) + y[1] * F(0b010, s, shifted(m, y, 0b111, 1)) +
                   y[2] * F(0b100, s, shifted(m, y, 0b111, 2)) + a;
        });
    }
}

template <class E>
double ftd_g(E& e, const Book& bk, std::uint32_t z, double t, const Vec& x)
{
    const auto& m = e.model();
    auto g = [&](std::uint32_t zz, double s, const Vec& y) { return ftd_g(e, bk, zz, s, y); };
    // after the counterparty default, or once the basket has triggered
    // (the counterparty default then finds K = 1, so the source vanishes)
    if (z & 0b100) return 0.0;
    switch (z) {
    case 0b011: return 0.0;
    case 0b001: return e.expect(t, x, 0b110, 0.0, [&](double s, const Vec& y) { return y[1] * g(0b011, s, shifted(m, y, 0b110, 1)); });
    case 0b010: return e.expect(t, x, 0b101, 0.0, [&](double s, const Vec& y) { return y[0] * g(0b011, s, shifted(m, y, 0b101, 0)); });
    default:
        return e.expect(t, x, 0b111, 0.0, [&](double s, const Vec& y) {
            const Vec post = shifted(m, y, 0b111, 2);
            const double exposure = e.positive([&] { return bk.b1 * ftd_F1(e, bk, 0b100, s, post); });
            return y[0] * g(0b001, s, shifted(m, y, 0b111, 0)) + y[1] * g(0b010, s, shifted(m, y, 0b111, 1)) +
                   bk.Lc(0b100) * y[2] * exposure;
        });
    }
}

enum class Family { cds, bond, ftd };

double evaluate(auto& e, Family fam, const Book& bk, OracleQuantity q, std::uint32_t z, double t, const Vec& x)
{
    switch (fam) {
    case Family::cds:
        if (q == OracleQuantity::claim) return cds_F1(e, bk, z, t, x);
        if (q == OracleQuantity::counterparty_cds) return cds_F2(e, bk, z, t, x);
        return single_name_g(e, bk, z, t, x, [&](std::uint32_t zz, double s, const Vec& y) { return cds_F1(e, bk, zz, s, y); });
    case Family::bond:
        if (q == OracleQuantity::claim) return bond_F1(e, bk, z, t, x);
        if (q == OracleQuantity::g)
            return single_name_g(e, bk, z, t, x,
                                 [&](std::uint32_t zz, double s, const Vec& y) { return bond_F1(e, bk, zz, s, y); });
        break;
    case Family::ftd:
        if (q == OracleQuantity::claim) return ftd_F1(e, bk, z, t, x);
        if (q == OracleQuantity::g) return ftd_g(e, bk, z, t, x);
        break;
    }
    throw std::invalid_argument("oracle: quantity not available for this portfolio");
}

Estimate run(const ModelParams& params, const Portfolio& portfolio, Family fam, std::size_t names, OracleQuantity q,
             DefaultState z, double t, std::span<const double> x, const OracleConfig& cfg)
{
    if (params.n_names != names || z.size() != names || x.size() != names)
        throw std::invalid_argument("oracle: wrong number of names for this portfolio");
    if (portfolio.claims.size() != 1 || portfolio.n_names() != names)
        throw std::invalid_argument("oracle: expects a single traded claim");
    if (!(t >= 0.0 && t <= cfg.maturity)) throw std::domain_error("oracle: t outside [0, T]");
    Book bk{&portfolio.claims[0], &portfolio, portfolio.weights[0]};
    Vec xv{};
    for (std::size_t i = 0; i < names; ++i) xv[i] = x[i];
    bool deterministic = !cfg.force_monte_carlo;
    for (std::size_t i = 0; i < names; ++i) deterministic = deterministic && params.total_variance(i) == 0.0;
    if (deterministic) {
        QuadratureEngine e(params, cfg);
        return {evaluate(e, fam, bk, q, z.bits(), t, xv), 0.0, 0};
    }
    std::vector<double> samples(cfg.n_paths);
    parallel_for(cfg.n_paths, cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RandomStream rng(cfg.seed, stream_id(StreamDomain::oracle, i));
            MonteCarloEngine e(params, cfg, rng);
            samples[i] = evaluate(e, fam, bk, q, z.bits(), t, xv);
        }
    });
    return summarize(samples);
}

}  // namespace

Estimate cds_oracle(const ModelParams& params, const Portfolio& portfolio, OracleQuantity q, DefaultState z, double t,
                    std::span<const double> x, const OracleConfig& cfg)
{
    if (portfolio.claims.empty() || portfolio.claims[0].kind != ClaimKind::cds ||
        portfolio.claims[0].references != std::vector<std::size_t>{0})
        throw std::invalid_argument("cds_oracle: portfolio must hold a CDS on name 0");
    return run(params, portfolio, Family::cds, 2, q, z, t, x, cfg);
}

Estimate bond_oracle(const ModelParams& params, const Portfolio& portfolio, OracleQuantity q, DefaultState z,
                     double t, std::span<const double> x, const OracleConfig& cfg)
{
    if (portfolio.claims.empty() || portfolio.claims[0].kind != ClaimKind::bond ||
        portfolio.claims[0].references != std::vector<std::size_t>{0})
        throw std::invalid_argument("bond_oracle: portfolio must hold a bond on name 0");
    return run(params, portfolio, Family::bond, 2, q, z, t, x, cfg);
}

Estimate ftd_oracle(const ModelParams& params, const Portfolio& portfolio, OracleQuantity q, DefaultState z,
                    double t, std::span<const double> x, const OracleConfig& cfg)
{
    if (portfolio.claims.empty() || portfolio.claims[0].kind != ClaimKind::first_to_default ||
        portfolio.claims[0].references != std::vector<std::size_t>{0, 1})
        throw std::invalid_argument("ftd_oracle: portfolio must hold a first-to-default on names 0 and 1");
    return run(params, portfolio, Family::ftd, 3, q, z, t, x, cfg);
}

bool oracle_supports(const Portfolio& p)
{
    if (p.claims.size() != 1) return false;
    const auto& c = p.claims[0];
    if (c.kind == ClaimKind::cds || c.kind == ClaimKind::bond)
        return p.n_names() == 2 && c.references == std::vector<std::size_t>{0};
    if (c.kind == ClaimKind::first_to_default)
        return p.n_names() == 3 && c.references == std::vector<std::size_t>{0, 1};
    return false;
}

Estimate portfolio_oracle(const ModelParams& params, const Portfolio& portfolio, OracleQuantity q, DefaultState z,
                          double t, std::span<const double> x, const OracleConfig& cfg)
{
    if (!oracle_supports(portfolio)) throw std::invalid_argument("oracle: unsupported portfolio shape");
    switch (portfolio.claims[0].kind) {
    case ClaimKind::cds: return cds_oracle(params, portfolio, q, z, t, x, cfg);
    case ClaimKind::bond: return bond_oracle(params, portfolio, q, z, t, x, cfg);
    default: return ftd_oracle(params, portfolio, q, z, t, x, cfg);
    }
}

double cds_constant_intensity(double loss, double spread, double lambda, double tau)
{
    return (loss - spread / lambda) * (-std::expm1(-lambda * tau));
}

}  // namespace cvahedge
