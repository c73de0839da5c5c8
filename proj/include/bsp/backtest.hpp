#pragma once

#include "bsp/basis.hpp"
#include "bsp/covariance.hpp"
#include "bsp/data.hpp"
#include "bsp/estimation.hpp"
#include "bsp/forecast.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace bsp {

struct BacktestSpec {
    std::vector<int> origins = default_origins();   // last fitted year of each run
    int horizons = 10;

    static std::vector<int> default_origins();
    void validate() const;
};

struct CellError {
    std::size_t surface = 0;
    int origin = 0;
    int horizon = 0;
    int age = 0;
    double forecast = 0.0;
    double observed = 0.0;
    double abs_error = 0.0;
    bool covered = false;
};

struct SkipRecord {
    std::size_t surface = 0;
    int origin = 0;
    int horizon = 0;        // 0 when the whole origin was skipped
    std::string reason;
};

struct HorizonMetrics {
    int horizon = 0;
    std::size_t cells = 0;
    double median_abs_error = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double coverage95 = 0.0;
};

struct BacktestReport {
    std::vector<HorizonMetrics> horizons;
    std::vector<CellError> cells;
    std::vector<SkipRecord> skips;
    std::vector<std::string> surface_labels;
};

/// Forecasts horizons 1..H after the last year of `history`; one entry per horizon with k ages.
using Forecaster = std::function<ForecastResult(const MortalitySurface& history, int horizons, std::uint64_t seed)>;

struct BspSettings {
    BasisSet basis;
    CorrelationPair correlations;
    FitConfig fit;
    DriftConfig drift;
};

/// Fit, smooth, build the drift model and forecast. Seeds of both stages derive from `seed`.
Forecaster bsp_forecaster(BspSettings settings);

/**
 * Harness check: last observed log-rate per age carried forward, bounds from the spread of
 * that age's past year-on-year changes growing with sqrt(h).
 */
Forecaster naive_forecaster();

/// Pools errors per horizon (no weighting across surfaces) and computes the metrics.
std::vector<HorizonMetrics> summarize(const std::vector<CellError>& cells, int horizons);

/**
 * Rolling-origin evaluation. Each (surface, origin) pair is an independent task seeded from
 * `seed` and its index; a failing task or a missing held-out year is recorded as a skip.
 */
BacktestReport run_backtest(const std::vector<MortalitySurface>& surfaces, const BacktestSpec& spec,
                            const Forecaster& forecaster, std::uint64_t seed);

std::string surface_label(const MortalitySurface& surface);

} // namespace bsp
