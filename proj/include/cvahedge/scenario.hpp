#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "cvahedge/claims.hpp"
#include "cvahedge/fk_engine.hpp"
#include "cvahedge/hedging.hpp"
#include "cvahedge/model.hpp"
#include "cvahedge/value_tables.hpp"

namespace cvahedge {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class RunMode { simulate, price, cva, hedge, verify };
std::string to_string(RunMode m);
RunMode mode_from_string(const std::string& s);

bool operator==(const LossMap& a, const LossMap& b);

struct ClaimEntry {
    std::string kind;                 // cds | bond | ftd
    std::vector<std::size_t> names;   // one name, or the basket
    double spread = 0.0;              // spread or coupon
    std::vector<LossMap> losses;      // one per name
    double weight = 1.0;

    friend bool operator==(const ClaimEntry&, const ClaimEntry&) = default;
};

struct PortfolioConfig {
    std::vector<ClaimEntry> claims;
    double counterparty_spread = 0.0;
    LossMap counterparty_loss;

    Portfolio build(std::size_t n_names) const;
    friend bool operator==(const PortfolioConfig&, const PortfolioConfig&) = default;
};

struct Scenario {
    ModelParams model;
    PortfolioConfig portfolio;
    SimConfig sim;
    EstimatorConfig estimator;   // maturity, seed and threads follow sim
    TableConfig tables;
    HedgeConfig hedge;
    std::string output_dir = "out";
    std::size_t report_paths = 16;
    RunMode mode = RunMode::verify;

    // propagate sim settings into the estimator and check every section
    void finalize();
};

bool operator==(const Scenario& a, const Scenario& b);

// JSON text; errors carry line/column or the offending field
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& s);

}  // namespace cvahedge
