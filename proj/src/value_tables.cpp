#include "cvahedge/value_tables.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cvahedge/parallel.hpp"

namespace cvahedge {

void TableConfig::validate() const
{
    if (grid_points < 2) throw std::invalid_argument("tables.grid_points must be >= 2");
    if (paths < 1) throw std::invalid_argument("tables.paths must be >= 1");
    if (pilot_paths < 1) throw std::invalid_argument("tables.pilot_paths must be >= 1");
    if (!(lower_quantile >= 0.0 && lower_quantile < upper_quantile && upper_quantile <= 1.0))
        throw std::invalid_argument("tables: quantiles must satisfy 0 <= lower < upper <= 1");
}

ValueTables::ValueTables(const ModelParams& params, const Portfolio& portfolio, const EstimatorConfig& cfg,
                         const TableConfig& tcfg)
    : params_(params), portfolio_(portfolio), cfg_(cfg), tcfg_(tcfg), n_(params.n_names),
      n_claims_(portfolio.claims.size()), nf_(n_claims_ + 2)
{
    cfg.validate();
    tcfg.validate();
    if (portfolio.n_names() != n_) throw std::invalid_argument("tables: portfolio and model disagree on names");
    for (const auto& c : portfolio.claims) specs_.push_back(CauchySpec{{1.0, 1.0, 1.0}, c});
    specs_.push_back(CauchySpec{{1.0, 1.0, 1.0}, portfolio.counterparty_cds});

    const std::size_t steps = step_count(0.0, cfg.maturity, cfg.dt);
    h_ = cfg.maturity / static_cast<double>(steps);
    times_.resize(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) times_[k] = k == steps ? cfg.maturity : h_ * static_cast<double>(k);

    // intensity ranges from a pilot run of the full market model
    std::vector<std::vector<double>> seen(tcfg.pilot_paths);
    const SimConfig sc = cfg.sim();
    parallel_for(tcfg.pilot_paths, cfg.threads, [&](std::size_t begin, std::size_t end) {
        MarketPath path;
        for (std::size_t p = begin; p < end; ++p) {
            RandomStream rng(cfg.seed, stream_id(StreamDomain::pilot, p));
            simulate_market(params, sc, 0.0, params.initial_intensity, DefaultState(n_), rng, path);
            auto& out = seen[p];
            out.assign(path.intensities.begin(), path.intensities.end());
            for (std::size_t m = 0; m < path.size(); ++m)
                for (std::size_t i = 0; i < n_; ++i)
                    if (path.state(m).defaulted(i) && path.default_times[i] < path.times[m]) out[m * n_ + i] = -1.0;
        }
    });
    lo_.resize(n_);
    hi_.resize(n_);
    step_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        std::vector<double> v;
        for (const auto& s : seen)
            for (std::size_t m = i; m < s.size(); m += n_)
                if (s[m] > 0.0) v.push_back(s[m]);
        std::sort(v.begin(), v.end());
        auto q = [&](double p) { return v[std::min(v.size() - 1, static_cast<std::size_t>(p * static_cast<double>(v.size())))]; };
        double max_jump = 0.0;
        for (std::size_t j = 0; j < n_; ++j) max_jump = std::max(max_jump, params.w(i, j));
        double lo = 0.9 * q(tcfg.lower_quantile);
        double hi = 1.1 * q(tcfg.upper_quantile) + max_jump;
        if (hi - lo < 1e-3 * std::max(hi, 1e-6)) hi = lo + std::max(0.1 * lo, 1e-6);
        lo_[i] = lo;
        hi_[i] = hi;
        step_[i] = (hi - lo) / static_cast<double>(tcfg.grid_points - 1);
    }

    const std::size_t states = std::size_t{1} << n_;
    tables_.resize(states);
    std::vector<std::uint32_t> order;
    for (std::uint32_t b = 0; b < states; ++b)
        if (!DefaultState(n_, b).all_defaulted()) order.push_back(b);
    std::stable_sort(order.begin(), order.end(),
                     [](std::uint32_t a, std::uint32_t b) { return std::popcount(a) > std::popcount(b); });
    for (auto b : order) build_state(b);
}

void ValueTables::node_point(const StateTable& st, std::size_t node, double* x) const
{
    std::fill(x, x + n_, 0.0);
    for (std::size_t r = 0; r < st.dims.size(); ++r) {
        const std::size_t i = st.dims[r];
        x[i] = lo_[i] + step_[i] * static_cast<double>(node % tcfg_.grid_points);
        node /= tcfg_.grid_points;
    }
}

void ValueTables::build_state(std::uint32_t bits)
{
    const DefaultState z(n_, bits);
    const std::size_t cp = n_ - 1;
    const std::size_t M = times_.size() - 1;
    const std::size_t gi = g_index();
    StateTable& st = tables_[bits];
    for (std::size_t i = 0; i < n_; ++i)
        if (!z.defaulted(i)) st.dims.push_back(i);
    st.nodes = 1;
    for (std::size_t r = 0; r < st.dims.size(); ++r) st.nodes *= tcfg_.grid_points;
    st.data.assign((M + 1) * st.nodes * nf_, 0.0);
    for (std::size_t node = 0; node < st.nodes; ++node)
        for (std::size_t c = 0; c <= n_claims_; ++c) st.data[(M * st.nodes + node) * nf_ + c] = specs_[c].terminal(z);

    const bool cp_alive = !z.defaulted(cp);
    const DefaultState zc = z.flip(cp);
    const Dynamics dyn(params_, cfg_.scheme);
    std::vector<std::size_t> alive = st.dims;

    for (std::size_t kk = M; kk-- > 0;) {
        const std::size_t steps = M - kk;
        parallel_for(st.nodes, cfg_.threads, [&](std::size_t begin, std::size_t end) {
            DiscountWalk w;
            std::vector<double> x0(n_), xs(n_), acc(nf_), child((steps + 1) * nf_), ups(steps + 1);
            for (std::size_t node = begin; node < end; ++node) {
                node_point(st, node, x0.data());
                std::fill(acc.begin(), acc.end(), 0.0);
                for (std::size_t p = 0; p < tcfg_.paths; ++p) {
                    RandomStream rng(cfg_.seed, stream_id(StreamDomain::tables, p));
                    make_walk(dyn, times_[kk], x0.data(), bits, steps, h_, rng, w);
                    double annuity = 0.0;
                    for (double l : w.level) annuity += l;
                    for (std::size_t c = 0; c <= n_claims_; ++c) {
                        const ClaimSpec& cl = specs_[c].claim;
                        acc[c] += specs_[c].terminal(z) * w.disc[steps] + (cl.k_at(z) ? 0.0 : cl.a_at(z) * annuity);
                    }
                    for (std::size_t j : alive) {
                        const std::uint32_t cb = bits | (1u << j);
                        const DefaultState zj(n_, cb);
                        for (std::size_t q = 0; q <= steps; ++q) {
                            const double* xq = w.x.data() + q * n_;
                            for (std::size_t i = 0; i < n_; ++i)
                                xs[i] = (i != j && !z.defaulted(i)) ? xq[i] + params_.w(i, j) : xq[i];
                            interpolate(cb, kk + q, xs.data(), child.data() + q * nf_, nullptr);
                            if (j == cp && cp_alive) {
                                double exposure = 0.0;
                                for (std::size_t c = 0; c < n_claims_; ++c) {
                                    const double b = portfolio_.weights[c];
                                    if (b != 0.0 && !portfolio_.claims[c].k_at(zc)) exposure += b * child[q * nf_ + c];
                                }
                                ups[q] = portfolio_.counterparty_loss(zc) * std::max(exposure, 0.0);
                            }
                        }
                        for (std::size_t m = 0; m < steps; ++m) {
                            const double xb = w.xbar[m * n_ + j];
                            const double a = w.lam[m] * w.h;
                            const double base = xb * w.disc[m] * w.h;
                            const double w1 = base * phi2(a);
                            const double w0 = base * phi1(a) - w1;
                            for (std::size_t c = 0; c <= n_claims_; ++c) {
                                const ClaimSpec& cl = specs_[c].claim;
                                const double comp = cl.k_at(z) ? cl.z_at(zj) - cl.z_at(z) : 0.0;
                                acc[c] += w0 * (child[m * nf_ + c] - comp) + w1 * (child[(m + 1) * nf_ + c] - comp);
                            }
                            if (cp_alive) {
                                if (j == cp)
                                    acc[gi] += w0 * ups[m] + w1 * ups[m + 1];
                                else
                                    acc[gi] += w0 * child[m * nf_ + gi] + w1 * child[(m + 1) * nf_ + gi];
                            }
                        }
                    }
                }
                double* out = st.data.data() + (kk * st.nodes + node) * nf_;
                for (std::size_t f = 0; f < nf_; ++f) out[f] = acc[f] / static_cast<double>(tcfg_.paths);
            }
        });
    }
    st.built = true;
}

void ValueTables::interpolate(std::uint32_t bits, std::size_t k, const double* x, double* out, double* grad) const
{
    const DefaultState z(n_, bits);
    if (grad) std::fill(grad, grad + nf_ * n_, 0.0);
    if (z.all_defaulted()) {
        const double remaining = cfg_.maturity - times_[k];
        for (std::size_t c = 0; c <= n_claims_; ++c) out[c] = specs_[c].full_default(z, remaining);
        out[g_index()] = 0.0;
        return;
    }
    const StateTable& st = tables_[bits];
    if (!st.built) throw std::logic_error("tables: state used before it was built");
    const std::size_t d = st.dims.size();
    const std::size_t G = tcfg_.grid_points;
    std::size_t idx[max_names];
    double frac[max_names];
    std::size_t stride[max_names];
    std::size_t s = 1;
    for (std::size_t r = 0; r < d; ++r) {
        const std::size_t i = st.dims[r];
        const double u = (x[i] - lo_[i]) / step_[i];
        const double fl = std::floor(u);
        const std::size_t cell = fl < 0.0 ? 0 : std::min(G - 2, static_cast<std::size_t>(fl));
        idx[r] = cell;
        frac[r] = u - static_cast<double>(cell);
        stride[r] = s;
        s *= G;
    }
    std::fill(out, out + nf_, 0.0);
    const double* base = st.data.data() + k * st.nodes * nf_;
    for (std::size_t corner = 0; corner < (std::size_t{1} << d); ++corner) {
        double wgt = 1.0;
        std::size_t node = 0;
        for (std::size_t r = 0; r < d; ++r) {
            const bool hi = (corner >> r) & 1u;
            wgt *= hi ? frac[r] : 1.0 - frac[r];
            node += (idx[r] + (hi ? 1 : 0)) * stride[r];
        }
        const double* v = base + node * nf_;
        for (std::size_t f = 0; f < nf_; ++f) out[f] += wgt * v[f];
        if (grad) {
            for (std::size_t r = 0; r < d; ++r) {
                double dw = ((corner >> r) & 1u) ? 1.0 : -1.0;
                for (std::size_t q = 0; q < d; ++q)
                    if (q != r) dw *= ((corner >> q) & 1u) ? frac[q] : 1.0 - frac[q];
                dw /= step_[st.dims[r]];
                for (std::size_t f = 0; f < nf_; ++f) grad[f * n_ + st.dims[r]] += dw * v[f];
            }
        }
    }
}

double ValueTables::value(std::size_t f, double t, std::span<const double> x, DefaultState z,
                          std::span<double> grad) const
{
    if (f >= nf_) throw std::out_of_range("tables: function index out of range");
    if (x.size() != n_ || z.size() != n_) throw std::invalid_argument("tables: state has wrong size");
    if (!grad.empty() && grad.size() != n_) throw std::invalid_argument("tables: gradient has wrong size");
    const std::size_t M = times_.size() - 1;
    double k_frac = 0.0;
    std::size_t k = M;
    if (t < cfg_.maturity) {
        const double u = std::max(t, 0.0) / h_;
        k = std::min(M - 1, static_cast<std::size_t>(u));
        k_frac = std::clamp(u - static_cast<double>(k), 0.0, 1.0);
    }
    std::vector<double> a(nf_), b(nf_), ga, gb;
    if (!grad.empty()) {
        ga.resize(nf_ * n_);
        gb.resize(nf_ * n_);
    }
    interpolate(z.bits(), k, x.data(), a.data(), grad.empty() ? nullptr : ga.data());
    double v = a[f];
    if (k_frac > 0.0) {
        interpolate(z.bits(), k + 1, x.data(), b.data(), grad.empty() ? nullptr : gb.data());
        v = (1.0 - k_frac) * a[f] + k_frac * b[f];
    }
    if (!grad.empty())
        for (std::size_t i = 0; i < n_; ++i)
            grad[i] = k_frac > 0.0 ? (1.0 - k_frac) * ga[f * n_ + i] + k_frac * gb[f * n_ + i] : ga[f * n_ + i];
    return v;
}

double ValueTables::value(std::size_t f, double t, std::span<const double> x, DefaultState z) const
{
    return value(f, t, x, z, std::span<double>{});
}

double ValueTables::claim_value(std::size_t c, double t, std::span<const double> x, DefaultState z,
                                RandomStream&) const
{
    return value(c, t, x, z);
}

}  // namespace cvahedge
