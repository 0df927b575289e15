#include "cvahedge/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cvahedge {

using json = nlohmann::json;

std::string to_string(RunMode m)
{
    switch (m) {
    case RunMode::simulate: return "simulate";
    case RunMode::price: return "price";
    case RunMode::cva: return "cva";
    case RunMode::hedge: return "hedge";
    default: return "verify";
    }
}

RunMode mode_from_string(const std::string& s)
{
    if (s == "simulate") return RunMode::simulate;
    if (s == "price") return RunMode::price;
    if (s == "cva") return RunMode::cva;
    if (s == "hedge") return RunMode::hedge;
    if (s == "verify") return RunMode::verify;
    throw ConfigError("unknown mode '" + s + "' (simulate|price|cva|hedge|verify)");
}

Portfolio PortfolioConfig::build(std::size_t n) const
{
    if (claims.empty()) throw ConfigError("portfolio.claims: at least one claim is required");
    std::vector<ClaimSpec> specs;
    std::vector<double> weights;
    for (std::size_t c = 0; c < claims.size(); ++c) {
        const auto& e = claims[c];
        const std::string where = "portfolio.claims[" + std::to_string(c) + "]";
        if (e.names.empty()) throw ConfigError(where + ".names: empty");
        for (auto i : e.names)
            if (i + 1 >= n) throw ConfigError(where + ".names: index must refer to a reference name (0.." +
                                              std::to_string(n - 2) + ")");
        if (e.losses.size() != e.names.size()) throw ConfigError(where + ": one loss map per name");
        try {
            if (e.kind == "cds") {
                if (e.names.size() != 1) throw ConfigError(where + ".names: a CDS references one name");
                specs.push_back(make_cds(n, e.names[0], e.spread, e.losses[0]));
            } else if (e.kind == "bond") {
                if (e.names.size() != 1) throw ConfigError(where + ".names: a bond references one name");
                specs.push_back(make_bond(n, e.names[0], e.spread, e.losses[0]));
            } else if (e.kind == "ftd") {
                specs.push_back(make_first_to_default(n, e.names, e.spread, e.losses));
            } else {
                throw ConfigError(where + ".kind: unknown claim kind '" + e.kind + "' (cds|bond|ftd)");
            }
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(where + ": " + ex.what());
        }
        weights.push_back(e.weight);
    }
    try {
        return make_portfolio(std::move(specs), std::move(weights), counterparty_spread, counterparty_loss);
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(std::string("portfolio: ") + ex.what());
    } catch (const std::out_of_range& ex) {
        throw ConfigError(std::string("portfolio: ") + ex.what());
    }
}

void Scenario::finalize()
{
    try {
        model.validate();
        sim.validate();
        estimator.maturity = sim.horizon;
        estimator.seed = sim.seed;
        estimator.threads = sim.threads;
        estimator.scheme = sim.scheme;
        estimator.substep_cap = sim.substep_cap;
        estimator.validate();
        tables.validate();
    } catch (const std::invalid_argument& ex) {
        throw ConfigError(ex.what());
    }
    portfolio.build(model.n_names);
    if (output_dir.empty()) throw ConfigError("output.dir must not be empty");
}

bool operator==(const LossMap& a, const LossMap& b)
{
    return a.table == b.table && (a.table.empty() ? a.constant == b.constant : true);
}

bool operator==(const Scenario& a, const Scenario& b)
{
    const auto& m = a.model;
    const auto& n = b.model;
    const bool model = m.n_names == n.n_names && m.kappa == n.kappa && m.nu == n.nu && m.sigma == n.sigma &&
                       m.vol_override == n.vol_override && m.contagion == n.contagion &&
                       m.initial_intensity == n.initial_intensity;
    const auto& s = a.sim;
    const auto& t = b.sim;
    const bool sim = s.horizon == t.horizon && s.dt == t.dt && s.n_paths == t.n_paths && s.seed == t.seed &&
                     s.substep_cap == t.substep_cap && s.scheme == t.scheme && s.threads == t.threads;
    const auto& e = a.estimator;
    const auto& f = b.estimator;
    const bool est = e.dt == f.dt && e.n_paths == f.n_paths && e.inner_paths == f.inner_paths &&
                     e.exposure_inner_paths == f.exposure_inner_paths && e.h_rel == f.h_rel &&
                     e.recursion_depth_cap == f.recursion_depth_cap &&
                     e.common_random_numbers == f.common_random_numbers && e.branch_limit == f.branch_limit;
    const bool tab = a.tables.grid_points == b.tables.grid_points && a.tables.paths == b.tables.paths &&
                     a.tables.pilot_paths == b.tables.pilot_paths &&
                     a.tables.lower_quantile == b.tables.lower_quantile &&
                     a.tables.upper_quantile == b.tables.upper_quantile;
    const bool hedge = a.hedge.value_paths == b.hedge.value_paths && a.hedge.min_paths == b.hedge.min_paths &&
                       a.hedge.keep_rows == b.hedge.keep_rows &&
                       a.hedge.bucket_points == b.hedge.bucket_points;
    return model && sim && est && tab && hedge && a.portfolio == b.portfolio && a.output_dir == b.output_dir &&
           a.report_paths == b.report_paths && a.mode == b.mode;
}

namespace {

// JSON object view that reports the dotted path of any bad field and
// rejects keys it does not know.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }
    ~Section() noexcept(false)
    {
        if (std::uncaught_exceptions()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(path_ + "." + it.key() + ": unknown key");
    }

    bool has(const std::string& k) const { return j_.contains(k); }
    const json& raw(const std::string& k)
    {
        seen_.insert(k);
        if (!j_.contains(k)) throw ConfigError(path_ + "." + k + ": missing");
        return j_.at(k);
    }
    std::string where(const std::string& k) const { return path_ + "." + k; }

    double number(const std::string& k) { return as_number(raw(k), where(k)); }
    double number(const std::string& k, double fallback) { return has(k) ? number(k) : (seen_.insert(k), fallback); }
    std::size_t count(const std::string& k) { return as_count(raw(k), where(k)); }
    std::size_t count(const std::string& k, std::size_t fallback) { return has(k) ? count(k) : (seen_.insert(k), fallback); }
    std::uint64_t u64(const std::string& k, std::uint64_t fallback)
    {
        seen_.insert(k);
        if (!has(k)) return fallback;
        const json& v = j_.at(k);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
            throw ConfigError(where(k) + ": expected a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(const std::string& k, bool fallback)
    {
        seen_.insert(k);
        if (!has(k)) return fallback;
        if (!j_.at(k).is_boolean()) throw ConfigError(where(k) + ": expected true or false");
        return j_.at(k).get<bool>();
    }
    std::string text(const std::string& k, const std::string& fallback)
    {
        seen_.insert(k);
        if (!has(k)) return fallback;
        if (!j_.at(k).is_string()) throw ConfigError(where(k) + ": expected a string");
        return j_.at(k).get<std::string>();
    }
    std::vector<double> numbers(const std::string& k) { return as_numbers(raw(k), where(k)); }
    std::vector<std::vector<double>> matrix(const std::string& k)
    {
        const json& v = raw(k);
        if (!v.is_array()) throw ConfigError(where(k) + ": expected an array of arrays");
        std::vector<std::vector<double>> out;
        for (std::size_t r = 0; r < v.size(); ++r)
            out.push_back(as_numbers(v[r], where(k) + "[" + std::to_string(r) + "]"));
        return out;
    }

    static double as_number(const json& v, const std::string& where)
    {
        if (!v.is_number()) throw ConfigError(where + ": expected a number");
        return v.get<double>();
    }
    static std::size_t as_count(const json& v, const std::string& where)
    {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
            throw ConfigError(where + ": expected a non-negative integer");
        return v.get<std::size_t>();
    }
    static std::vector<double> as_numbers(const json& v, const std::string& where)
    {
        if (!v.is_array()) throw ConfigError(where + ": expected an array of numbers");
        std::vector<double> out;
        for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], where + "[" + std::to_string(i) + "]"));
        return out;
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

LossMap loss_from(const json& v, const std::string& where)
{
    if (v.is_number()) return LossMap::flat(v.get<double>());
    if (v.is_array()) return LossMap{Section::as_numbers(v, where), 0.6};
    throw ConfigError(where + ": expected a loss rate or a table of 2^n loss rates");
}

json loss_to(const LossMap& l)
{
    if (l.table.empty()) return l.constant;
    return l.table;
}

std::string line_col(const std::string& text, std::size_t byte)
{
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace

Scenario parse_scenario(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("scenario parse error at " + line_col(text, e.byte) + ": " + e.what());
    }
    Scenario s;
    Section top(root, "scenario");
    {
        Section m(top.raw("model"), "model");
        s.model.n_names = m.count("n_names");
        s.model.kappa = m.numbers("kappa");
        s.model.nu = m.numbers("nu");
        s.model.sigma = m.has("sigma") ? m.numbers("sigma") : (m.number("sigma", 0.0), std::vector<double>{});
        if (m.has("vol_override")) s.model.vol_override = m.matrix("vol_override");
        else m.number("vol_override", 0.0);
        s.model.contagion = m.matrix("contagion");
        s.model.initial_intensity = m.numbers("initial_intensity");
    }
    {
        Section p(top.raw("portfolio"), "portfolio");
        const json& claims = p.raw("claims");
        if (!claims.is_array()) throw ConfigError("portfolio.claims: expected an array");
        for (std::size_t c = 0; c < claims.size(); ++c) {
            const std::string where = "portfolio.claims[" + std::to_string(c) + "]";
            Section e(claims[c], where);
            ClaimEntry ce;
            ce.kind = e.text("kind", "");
            const json& names = e.raw("names");
            if (!names.is_array()) throw ConfigError(where + ".names: expected an array of name indices");
            for (std::size_t r = 0; r < names.size(); ++r)
                ce.names.push_back(Section::as_count(names[r], where + ".names[" + std::to_string(r) + "]"));
            ce.spread = e.number("spread");
            ce.weight = e.number("weight", 1.0);
            if (ce.kind == "ftd") {
                const json& losses = e.raw("losses");
                if (!losses.is_array()) throw ConfigError(where + ".losses: expected one loss per basket name");
                for (std::size_t r = 0; r < losses.size(); ++r)
                    ce.losses.push_back(loss_from(losses[r], where + ".losses[" + std::to_string(r) + "]"));
            } else {
                ce.losses.push_back(loss_from(e.raw("loss"), where + ".loss"));
            }
            s.portfolio.claims.push_back(ce);
        }
        Section cp(p.raw("counterparty"), "portfolio.counterparty");
        s.portfolio.counterparty_spread = cp.number("spread");
        s.portfolio.counterparty_loss = loss_from(cp.raw("loss"), "portfolio.counterparty.loss");
    }
    {
        Section m(top.raw("sim"), "sim");
        s.sim.horizon = m.number("horizon");
        s.sim.dt = m.number("dt");
        s.sim.n_paths = m.count("n_paths");
        s.sim.seed = m.u64("seed", 1);
        s.sim.substep_cap = m.count("substep_cap", 32);
        try {
            s.sim.scheme = scheme_from_string(m.text("scheme", "euler_full_truncation"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("sim.scheme: ") + e.what());
        }
        s.sim.threads = m.count("threads", 1);
    }
    {
        EstimatorConfig d;
        d.dt = s.sim.dt;
        TableConfig td;
        HedgeConfig hd;
        if (top.has("estimator")) {
            Section e(top.raw("estimator"), "estimator");
            d.dt = e.number("dt", s.sim.dt);
            d.n_paths = e.count("n_paths", d.n_paths);
            d.inner_paths = e.count("inner_paths", d.inner_paths);
            d.exposure_inner_paths = e.count("exposure_inner_paths", d.exposure_inner_paths);
            d.h_rel = e.number("h_rel", d.h_rel);
            d.recursion_depth_cap = e.count("recursion_depth_cap", d.recursion_depth_cap);
            d.common_random_numbers = e.boolean("common_random_numbers", d.common_random_numbers);
            d.branch_limit = e.count("branch_limit", d.branch_limit);
            td.grid_points = e.count("table_grid_points", td.grid_points);
            td.paths = e.count("table_paths", td.paths);
            td.pilot_paths = e.count("table_pilot_paths", td.pilot_paths);
            td.lower_quantile = e.number("table_lower_quantile", td.lower_quantile);
            td.upper_quantile = e.number("table_upper_quantile", td.upper_quantile);
            hd.value_paths = e.count("hedge_value_paths", hd.value_paths);
            hd.min_paths = e.count("hedge_min_paths", hd.min_paths);
            hd.keep_rows = e.count("hedge_keep_rows", hd.keep_rows);
            hd.bucket_points = e.count("hedge_bucket_points", hd.bucket_points);
        }
        s.estimator = d;
        s.tables = td;
        s.hedge = hd;
    }
    if (top.has("output")) {
        Section o(top.raw("output"), "output");
        s.output_dir = o.text("dir", s.output_dir);
        s.mode = mode_from_string(o.text("mode", to_string(s.mode)));
        s.report_paths = o.count("report_paths", s.report_paths);
    }
    s.finalize();
    return s;
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_scenario(buf.str());
    } catch (const ConfigError& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string serialize_scenario(const Scenario& s)
{
    json root;
    json& m = root["model"];
    m["n_names"] = s.model.n_names;
    m["kappa"] = s.model.kappa;
    m["nu"] = s.model.nu;
    m["sigma"] = s.model.sigma;
    if (!s.model.vol_override.empty()) m["vol_override"] = s.model.vol_override;
    m["contagion"] = s.model.contagion;
    m["initial_intensity"] = s.model.initial_intensity;
    json claims = json::array();
    for (const auto& c : s.portfolio.claims) {
        json e;
        e["kind"] = c.kind;
        e["names"] = c.names;
        e["spread"] = c.spread;
        e["weight"] = c.weight;
        if (c.kind == "ftd") {
            json l = json::array();
            for (const auto& x : c.losses) l.push_back(loss_to(x));
            e["losses"] = l;
        } else {
            e["loss"] = loss_to(c.losses.at(0));
        }
        claims.push_back(e);
    }
    root["portfolio"]["claims"] = claims;
    root["portfolio"]["counterparty"]["spread"] = s.portfolio.counterparty_spread;
    root["portfolio"]["counterparty"]["loss"] = loss_to(s.portfolio.counterparty_loss);
    json& sim = root["sim"];
    sim["horizon"] = s.sim.horizon;
    sim["dt"] = s.sim.dt;
    sim["n_paths"] = s.sim.n_paths;
    sim["seed"] = s.sim.seed;
    sim["substep_cap"] = s.sim.substep_cap;
    sim["scheme"] = to_string(s.sim.scheme);
    sim["threads"] = s.sim.threads;
    json& e = root["estimator"];
    e["dt"] = s.estimator.dt;
    e["n_paths"] = s.estimator.n_paths;
    e["inner_paths"] = s.estimator.inner_paths;
    e["exposure_inner_paths"] = s.estimator.exposure_inner_paths;
    e["h_rel"] = s.estimator.h_rel;
    e["recursion_depth_cap"] = s.estimator.recursion_depth_cap;
    e["common_random_numbers"] = s.estimator.common_random_numbers;
    e["branch_limit"] = s.estimator.branch_limit;
    e["table_grid_points"] = s.tables.grid_points;
    e["table_paths"] = s.tables.paths;
    e["table_pilot_paths"] = s.tables.pilot_paths;
    e["table_lower_quantile"] = s.tables.lower_quantile;
    e["table_upper_quantile"] = s.tables.upper_quantile;
    e["hedge_value_paths"] = s.hedge.value_paths;
    e["hedge_min_paths"] = s.hedge.min_paths;
    e["hedge_keep_rows"] = s.hedge.keep_rows;
    e["hedge_bucket_points"] = s.hedge.bucket_points;
    root["output"]["dir"] = s.output_dir;
    root["output"]["mode"] = to_string(s.mode);
    root["output"]["report_paths"] = s.report_paths;
    return root.dump(2) + "\n";
}

}  // namespace cvahedge
