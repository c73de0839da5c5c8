#pragma once

#include "bsp/backtest.hpp"
#include "bsp/basis.hpp"
#include "bsp/covariance.hpp"
#include "bsp/data.hpp"
#include "bsp/estimation.hpp"
#include "bsp/forecast.hpp"
#include "bsp/simulate.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bsp::cli {

/// One country's input files: an interchange CSV, or HMD Mx and/or Deaths + Exposures tables.
struct InputSpec {
    std::string country;
    std::string surface_csv;
    std::string mx;
    std::string deaths;
    std::string exposures;
};

struct SimSection {
    HyperParams params{std::exp(-6.0), std::exp(-4.6), std::exp(-2.8), std::exp(-3.9)};
    int n_years = 80;
    int first_year = 1933;
    double exposure = 1e6;
    SimMode mode = SimMode::Gaussian;
    double initial_variance = 10.0;
    double level_variance = 2.0;
    std::string country = "SIM";
};

struct Prop1Section {
    std::vector<double> exposures{1e2, 1e4, 1e6};
    int draws = 100000;
    double log_rate = -4.605170185988091;   // log 0.01
    double sigma = 0.05;
};

struct RunConfig {
    std::vector<InputSpec> inputs;
    std::string country;                       // empty selects every input
    std::vector<Gender> genders{Gender::Female};
    int max_age = 100;
    std::optional<std::pair<int, int>> years;

    int degree = 3;
    std::vector<double> interior_knots;        // empty: default knots rescaled to the age range
    KernelConfig kernel_beta;
    std::optional<KernelConfig> kernel_a;

    FitConfig fit;
    std::optional<HyperParams> params;         // fixed hyperparameters, skips fitting
    std::string fit_result;                    // fit JSON from an earlier run

    DriftConfig drift;
    int horizons = 10;
    std::string forecast_mode = "drift";
    std::vector<int> smooth_splines{3, 10, 17};   // 1-based

    SimSection simulate;
    BacktestSpec backtest;
    std::string backtest_forecaster = "bsp";
    Prop1Section prop1;

    std::uint64_t seed = 1;
    std::string out = "bsp_out";

    void validate() const;
    /// Applies the top-level seed to every randomized stage.
    void propagate_seed();
};

RunConfig parse_config(const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& config);

/// Parses "A..B" into a closed year range.
std::pair<int, int> parse_origins(const std::string& text);

BasisSet make_basis(const RunConfig& config);
CorrelationPair make_correlations(const RunConfig& config, const BasisSet& basis);

nlohmann::json hyperparams_json(const HyperParams& hp);
HyperParams hyperparams_from_json(const nlohmann::json& j);

} // namespace bsp::cli
