#include <doctest.h>

#include <cmath>

#include "cvahedge/closed_forms.hpp"
#include "cvahedge/fk_engine.hpp"
#include "test_util.hpp"

using namespace cvahedge;
using testutil::combined_se;
using testutil::constant_params;
using testutil::small_config;

namespace {

CauchySpec spec_of(const ClaimSpec& c, std::array<double, 3> alpha = {1.0, 1.0, 1.0}) { return CauchySpec{alpha, c}; }

Portfolio cds_book(std::size_t n = 2, double b = 1.0)
{
    return make_portfolio({make_cds(n, 0, 0.02, LossMap::flat(0.6))}, {b}, 0.03, LossMap::flat(0.6));
}

}  // namespace

TEST_CASE("full default state is exact")
{
    const ModelParams p = testutil::make_params(2, 0.03, 0.4, 0.1, 0.05, 0.1);
    const auto cfg = small_config(1.0, 200);
    const CauchySpec s = spec_of(make_cds(2, 0, 0.02, LossMap::flat(0.6)), {0.0, 1.0, 1.0});
    const std::vector<double> x{0.05, 0.07};
    for (const Estimate& e : {estimate_F_direct(p, s, 0.2, x, DefaultState(2, 0b11), cfg),
                              estimate_F_recursive(p, s, 0.2, x, DefaultState(2, 0b11), cfg)}) {
        CHECK(e.value == 0.6);
        CHECK(e.std_error == 0.0);
    }
}

TEST_CASE("zero claim and terminal consistency")
{
    const ModelParams p = testutil::make_params(3, 0.03, 0.4, 0.1, 0.05, 0.1);
    const auto cfg = small_config(1.0, 300);
    const std::vector<double> x{0.05, 0.07, 0.09};
    const CauchySpec zero = spec_of(make_zero_claim(3));
    for (const Estimate& e : {estimate_F_direct(p, zero, 0.0, x, DefaultState(3), cfg),
                              estimate_F_recursive(p, zero, 0.0, x, DefaultState(3), cfg)}) {
        CHECK(e.value == 0.0);
        CHECK(e.std_error == 0.0);
    }
    const CauchySpec bond = spec_of(make_bond(3, 1, 0.04, LossMap::flat(0.6)));
    for (std::uint32_t z = 0; z < 8; ++z) {
        const DefaultState st(3, z);
        CHECK(estimate_F_direct(p, bond, 1.0, x, st, cfg).value == bond.terminal(st));
        CHECK(estimate_F_recursive(p, bond, 1.0, x, st, cfg).value == bond.terminal(st));
    }
}

TEST_CASE("constant intensity cds")
{
    const double lam = 0.3, T = 1.0;
    const ModelParams p = constant_params({lam, 0.1});
    const CauchySpec s = spec_of(make_cds(2, 0, 0.02, LossMap::flat(0.6)));
    const double exact = cds_constant_intensity(0.6, 0.02, lam, T);
    const auto cfg = small_config(T, 10000, 3, 0.05);
    const std::vector<double> x{lam, 0.1};
    const Estimate d = estimate_F_direct(p, s, 0.0, x, DefaultState(2), cfg);
    const Estimate r = estimate_F_recursive(p, s, 0.0, x, DefaultState(2), cfg);
    CHECK(agree(d, exact));
    CHECK(agree(r, exact));
    // once the counterparty is gone every child value is constant and the
    // recursion integrates the discount exactly
    const Estimate alone = estimate_F_recursive(p, s, 0.0, x, DefaultState(2, 0b10), cfg);
    CHECK(alone.value == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("direct and recursive agree on random models")
{
    RandomStream gen(21, 0);
    for (int trial = 0; trial < 4; ++trial) {
        const ModelParams p = testutil::random_params(gen, 3, 2);
        const std::vector<ClaimSpec> claims{
            make_cds(3, 0, 0.02, LossMap::flat(0.6)), make_bond(3, 1, 0.04, LossMap::flat(0.5)),
            make_first_to_default(3, {0, 1}, 0.05, {LossMap::flat(0.6), LossMap::flat(0.5)})};
        const std::uint32_t z = gen.next_u32() % 8;
        const double t = 0.5 * gen.uniform();
        const auto cfg = small_config(1.0, 4000, 40 + trial, 0.05);
        for (const auto& c : claims) {
            const Estimate d = estimate_F_direct(p, spec_of(c), t, p.initial_intensity, DefaultState(3, z), cfg);
            const Estimate r = estimate_F_recursive(p, spec_of(c), t, p.initial_intensity, DefaultState(3, z), cfg);
            CHECK(std::abs(d.value - r.value) <= 3.0 * combined_se(d, r) + 1e-12);
        }
    }
}

TEST_CASE("alpha linearity")
{
    RandomStream gen(17, 0);
    const ModelParams p = testutil::random_params(gen, 2, 1);
    const ClaimSpec bond = make_bond(2, 0, 0.04, LossMap::flat(0.6));
    const auto cfg = small_config(1.0, 5000, 5);
    auto cfg2 = cfg;
    cfg2.seed = 6;
    auto cfg3 = cfg;
    cfg3.seed = 7;
    for (std::uint32_t z : {0u, 2u}) {
        const DefaultState st(2, z);
        const Estimate a = estimate_F_recursive(p, spec_of(bond, {1, 0, 0}), 0.1, p.initial_intensity, st, cfg);
        const Estimate b = estimate_F_recursive(p, spec_of(bond, {0, 1, 1}), 0.1, p.initial_intensity, st, cfg2);
        const Estimate c = estimate_F_recursive(p, spec_of(bond, {1, 1, 1}), 0.1, p.initial_intensity, st, cfg3);
        const double se = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error + c.std_error * c.std_error);
        CHECK(std::abs(a.value + b.value - c.value) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("g after the counterparty default and for a zero book")
{
    const ModelParams p = testutil::make_params(2, 0.03, 0.4, 0.1, 0.05, 0.1);
    const std::vector<double> x{0.05, 0.08};
    const auto cfg = small_config(1.0, 200);
    for (std::uint32_t z : {0b10u, 0b11u}) CHECK(estimate_g(p, cds_book(), 0.0, x, DefaultState(2, z), cfg).value == 0.0);
    const Estimate zero = estimate_g(p, cds_book(2, 0.0), 0.0, x, DefaultState(2), cfg);
    CHECK(zero.value == 0.0);
    CHECK(zero.std_error == 0.0);
}

TEST_CASE("g against the closed form")
{
    ModelParams p = testutil::make_params(2, 0.03, 0.4, 0.0, 0.05, 0.0);
    p.contagion[0][1] = 0.1;
    p.contagion[1][0] = 0.05;
    const std::vector<double> x{0.05, 0.08};
    OracleConfig oc;
    oc.maturity = 1.0;
    const Estimate o = cds_oracle(p, cds_book(), OracleQuantity::g, DefaultState(2), 0.0, x, oc);
    const auto cfg = small_config(1.0, 20000, 9);
    const Estimate g = estimate_g(p, cds_book(), 0.0, x, DefaultState(2), cfg);
    CHECK(g.value >= -3.0 * g.std_error);
    CHECK(agree(g, o, 3.0, 1e-6));
}

TEST_CASE("finite-difference gradients")
{
    const double T = 1.0;
    ModelParams p = constant_params({0.2, 0.1});
    const Portfolio book = cds_book();
    const CauchySpec s = spec_of(book.claims[0]);
    // d/dl (L - e/l)(1 - e^{-l T})
    auto dfdl = [&](double l) {
        return 0.02 / (l * l) * (1 - std::exp(-l * T)) + (0.6 - 0.02 / l) * T * std::exp(-l * T);
    };
    const std::vector<double> x{0.2, 0.1};
    const DefaultState cp_gone(2, 0b10);
    auto cfg = small_config(T, 20, 1);

    SUBCASE("quadrature oracle")
    {
        OracleConfig oc;
        oc.maturity = T;
        PointEstimator f = [&](double t, std::span<const double> xx, DefaultState z, const EstimatorConfig&) {
            return cds_oracle(p, book, OracleQuantity::claim, z, t, xx, oc);
        };
        cfg.h_rel = 0.01;
        const double e1 = std::abs(gradient_x(f, 0.0, x, cp_gone, cfg)[0] - dfdl(0.2));
        cfg.h_rel = 0.005;
        const double e2 = std::abs(gradient_x(f, 0.0, x, cp_gone, cfg)[0] - dfdl(0.2));
        CHECK(e1 / std::abs(dfdl(0.2)) < 1e-3);
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
        // with both names alive and no contagion the value is the same function
        const auto g = gradient_x(f, 0.0, x, DefaultState(2), cfg);
        CHECK(g[0] == doctest::Approx(dfdl(0.2)).epsilon(1e-3));
        CHECK(std::abs(g[1]) < 1e-8);
    }
    SUBCASE("recursive estimator")
    {
        PointEstimator f = [&](double t, std::span<const double> xx, DefaultState z, const EstimatorConfig& c) {
            return estimate_F_recursive(p, s, t, xx, z, c);
        };
        cfg.h_rel = 0.01;
        const double e1 = std::abs(gradient_x(f, 0.0, x, cp_gone, cfg)[0] - dfdl(0.2));
        cfg.h_rel = 0.005;
        const double e2 = std::abs(gradient_x(f, 0.0, x, cp_gone, cfg)[0] - dfdl(0.2));
        CHECK(e1 / std::abs(dfdl(0.2)) < 1e-3);
        CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));
        CHECK(gradient_x(f, 0.0, x, DefaultState(2, 0b01), cfg)[0] == 0.0);
    }
    SUBCASE("zero claim")
    {
        const CauchySpec zero = spec_of(make_zero_claim(2));
        PointEstimator fz = [&](double t, std::span<const double> xx, DefaultState z, const EstimatorConfig& c) {
            return estimate_F_recursive(p, zero, t, xx, z, c);
        };
        for (double v : gradient_x(fz, 0.0, x, DefaultState(2), cfg)) CHECK(v == 0.0);
    }
}

TEST_CASE("jump differences")
{
    const double T = 1.0;
    const ModelParams p = constant_params({0.2, 0.1});
    const CauchySpec s = spec_of(make_cds(2, 0, 0.02, LossMap::flat(0.6)));
    PointEstimator f = [&](double t, std::span<const double> x, DefaultState z, const EstimatorConfig& c) {
        return estimate_F_recursive(p, s, t, x, z, c);
    };
    const std::vector<double> x{0.2, 0.1};
    const auto cfg = small_config(T, 4000, 2);
    // own default: L minus the pre-default value
    const Estimate own = jump_difference(p, f, 0.0, x, DefaultState(2, 0b10), 0, cfg);
    CHECK(own.value == doctest::Approx(0.6 - cds_constant_intensity(0.6, 0.02, 0.2, T)).epsilon(1e-10));
    const Estimate own0 = jump_difference(p, f, 0.0, x, DefaultState(2), 0, cfg);
    CHECK(agree(own0, 0.6 - cds_constant_intensity(0.6, 0.02, 0.2, T)));
    // insensitive to the counterparty without contagion
    const Estimate other = jump_difference(p, f, 0.0, x, DefaultState(2), 1, cfg);
    CHECK(std::abs(other.value) <= 3.0 * other.std_error + 1e-12);
    // zero claim
    const CauchySpec zero = spec_of(make_zero_claim(2));
    PointEstimator fz = [&](double t, std::span<const double> xx, DefaultState z, const EstimatorConfig& c) {
        return estimate_F_recursive(p, zero, t, xx, z, c);
    };
    CHECK(jump_difference(p, fz, 0.0, x, DefaultState(2), 1, cfg).value == 0.0);
    CHECK_THROWS(jump_difference(p, f, 0.0, x, DefaultState(2, 0b10), 1, cfg));
}

TEST_CASE("monotone discounting")
{
    RandomStream gen(2, 2);
    const ModelParams p = testutil::random_params(gen, 3, 1);
    const auto cfg = small_config(1.0, 2000, 4);
    std::vector<double> x = p.initial_intensity;
    double prev = 2.0;
    for (double scale : {0.5, 1.0, 2.0, 4.0}) {
        std::vector<double> xs = x;
        for (double& v : xs) v *= scale;
        const double s = estimate_survival(p, 0.0, xs, DefaultState(3), cfg).value;
        CHECK(s <= prev);
        prev = s;
    }
}

TEST_CASE("worker count does not change estimates")
{
    RandomStream gen(8, 8);
    const ModelParams p = testutil::random_params(gen, 3, 2);
    const CauchySpec s = spec_of(make_first_to_default(3, {0, 1}, 0.05, {LossMap::flat(0.6), LossMap::flat(0.5)}));
    auto c1 = small_config(1.0, 1500, 11);
    auto c3 = c1;
    c3.threads = 3;
    const Estimate a = estimate_F_recursive(p, s, 0.0, p.initial_intensity, DefaultState(3), c1);
    const Estimate b = estimate_F_recursive(p, s, 0.0, p.initial_intensity, DefaultState(3), c3);
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    const Estimate d1 = estimate_F_direct(p, s, 0.0, p.initial_intensity, DefaultState(3), c1);
    const Estimate d3 = estimate_F_direct(p, s, 0.0, p.initial_intensity, DefaultState(3), c3);
    CHECK(d1.value == d3.value);
}

TEST_CASE("configuration errors")
{
    const ModelParams p = testutil::make_params(2, 0.03, 0.4, 0.1, 0.05);
    auto cfg = small_config(1.0, 0);
    const CauchySpec s = spec_of(make_cds(2, 0, 0.02, LossMap::flat(0.6)));
    CHECK_THROWS_AS(estimate_F_direct(p, s, 0.0, p.initial_intensity, DefaultState(2), cfg), std::invalid_argument);
    cfg.n_paths = 10;
    CHECK_THROWS(estimate_F_direct(p, s, 1.5, p.initial_intensity, DefaultState(2), cfg));
}
