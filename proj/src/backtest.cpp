#include "bsp/backtest.hpp"

#include "bsp/errors.hpp"
#include "bsp/kalman.hpp"
#include "bsp/parallel.hpp"
#include "bsp/pipeline.hpp"
#include "bsp/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bsp {

namespace {

std::uint64_t task_seed(std::uint64_t seed, std::uint64_t index) {
    // splitmix64 step
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

struct TaskOutcome {
    std::vector<CellError> cells;
    std::vector<SkipRecord> skips;
};

} // namespace

std::vector<int> BacktestSpec::default_origins() {
    std::vector<int> out;
    for (int y = 1990; y <= 2010; ++y) {
        out.push_back(y);
    }
    return out;
}

void BacktestSpec::validate() const {
    if (origins.empty()) {
        throw std::invalid_argument("backtest needs at least one origin");
    }
    if (horizons < 1) {
        throw std::invalid_argument("horizons must be at least 1");
    }
}

std::string surface_label(const MortalitySurface& surface) {
    const std::string code = surface.country_code.empty() ? "surface" : surface.country_code;
    return code + "-" + to_string(surface.gender);
}

Forecaster bsp_forecaster(BspSettings settings) {
    return [settings = std::move(settings)](const MortalitySurface& history, int horizons, std::uint64_t seed) {
        FitConfig fit_config = settings.fit;
        fit_config.rng_seed = task_seed(seed, 0);
        DriftConfig drift_config = settings.drift;
        drift_config.seed = task_seed(seed, 1);
        drift_config.variance_fit.rng_seed = task_seed(seed, 2);

        const PreparedData data = prepare(history, settings.basis);
        const FitResult fitted = fit(data, settings.correlations, fit_config);
        const SmoothedSurface smoothed = run_smoother(data, settings.correlations, fitted.best);
        const DriftModel drift = build_drift_model(data, smoothed, settings.correlations, fitted.best, drift_config);
        return forecast(drift, data.design, horizons);
    };
}

Forecaster naive_forecaster() {
    return [](const MortalitySurface& history, int horizons, std::uint64_t) {
        const auto k = static_cast<Eigen::Index>(history.k());
        const auto n = static_cast<Eigen::Index>(history.n());
        const double nan = std::numeric_limits<double>::quiet_NaN();
        Eigen::VectorXd last = Eigen::VectorXd::Constant(k, nan);
        Eigen::VectorXd sd = Eigen::VectorXd::Constant(k, nan);
        for (Eigen::Index i = 0; i < k; ++i) {
            std::vector<double> diffs;
            double previous = nan;
            for (Eigen::Index s = 0; s < n; ++s) {
                if (!history.observed(i, s)) {
                    continue;
                }
                const double value = history.log_rates(i, s);
                if (std::isfinite(previous)) {
                    diffs.push_back(value - previous);
                }
                previous = value;
            }
            last[i] = previous;
            if (diffs.size() >= 2) {
                sd[i] = std::sqrt(sample_variance(diffs));
            }
        }
        ForecastResult out;
        for (int h = 1; h <= horizons; ++h) {
            HorizonForecast f;
            f.horizon = h;
            f.point = last;
            f.variance = sd.array().square() * static_cast<double>(h);
            const Eigen::VectorXd half = kNormalQuantile975 * f.variance.cwiseSqrt();
            f.lower = f.point - half;
            f.upper = f.point + half;
            out.horizons.push_back(std::move(f));
        }
        return out;
    };
}

std::vector<HorizonMetrics> summarize(const std::vector<CellError>& cells, int horizons) {
    std::vector<std::vector<double>> errors(static_cast<std::size_t>(horizons));
    std::vector<std::size_t> covered(static_cast<std::size_t>(horizons), 0);
    for (const auto& c : cells) {
        if (c.horizon < 1 || c.horizon > horizons) {
            continue;
        }
        const auto h = static_cast<std::size_t>(c.horizon - 1);
        errors[h].push_back(c.abs_error);
        covered[h] += c.covered ? 1 : 0;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<HorizonMetrics> out;
    for (int h = 1; h <= horizons; ++h) {
        const auto idx = static_cast<std::size_t>(h - 1);
        HorizonMetrics m;
        m.horizon = h;
        m.cells = errors[idx].size();
        if (m.cells == 0) {
            m.median_abs_error = m.q1 = m.q3 = m.coverage95 = nan;
        } else {
            m.median_abs_error = quantile(errors[idx], 0.5);
            m.q1 = quantile(errors[idx], 0.25);
            m.q3 = quantile(errors[idx], 0.75);
            m.coverage95 = static_cast<double>(covered[idx]) / static_cast<double>(m.cells);
        }
        out.push_back(m);
    }
    return out;
}

BacktestReport run_backtest(const std::vector<MortalitySurface>& surfaces, const BacktestSpec& spec,
                            const Forecaster& forecaster, std::uint64_t seed) {
    spec.validate();
    const std::size_t n_origins = spec.origins.size();
    const std::size_t n_tasks = surfaces.size() * n_origins;
    std::vector<TaskOutcome> outcomes(n_tasks);

    parallel_for(n_tasks, [&](std::size_t task) {
        const std::size_t si = task / n_origins;
        const int origin = spec.origins[task % n_origins];
        const MortalitySurface& surface = surfaces[si];
        TaskOutcome& out = outcomes[task];

        if (!surface.year_index(origin)) {
            out.skips.push_back({si, origin, 0, "origin year not in data"});
            return;
        }
        ForecastResult result;
        try {
            const MortalitySurface history = surface.truncated(origin);
            result = forecaster(history, spec.horizons, task_seed(seed, task));
        } catch (const std::exception& e) {
            out.skips.push_back({si, origin, 0, e.what()});
            return;
        }
        if (static_cast<int>(result.horizons.size()) < spec.horizons) {
            out.skips.push_back({si, origin, 0, "forecaster returned too few horizons"});
            return;
        }
        for (int h = 1; h <= spec.horizons; ++h) {
            const auto col = surface.year_index(origin + h);
            if (!col) {
                out.skips.push_back({si, origin, h, "held-out year " + std::to_string(origin + h) + " not available"});
                continue;
            }
            const HorizonForecast& f = result.horizons[static_cast<std::size_t>(h - 1)];
            const auto s = static_cast<Eigen::Index>(*col);
            for (std::size_t a = 0; a < surface.k(); ++a) {
                const auto i = static_cast<Eigen::Index>(a);
                if (!surface.observed(i, s)) {
                    out.skips.push_back({si, origin, h, "age " + std::to_string(surface.ages[a]) + " not observed"});
                    continue;
                }
                if (!std::isfinite(f.point[i])) {
                    out.skips.push_back({si, origin, h, "no forecast for age " + std::to_string(surface.ages[a])});
                    continue;
                }
                CellError c;
                c.surface = si;
                c.origin = origin;
                c.horizon = h;
                c.age = surface.ages[a];
                c.forecast = f.point[i];
                c.observed = surface.log_rates(i, s);
                c.abs_error = std::abs(c.forecast - c.observed);
                c.covered = c.observed >= f.lower[i] && c.observed <= f.upper[i];
                out.cells.push_back(c);
            }
        }
    });

    BacktestReport report;
    for (const auto& s : surfaces) {
        report.surface_labels.push_back(surface_label(s));
    }
    for (auto& o : outcomes) {
        report.cells.insert(report.cells.end(), o.cells.begin(), o.cells.end());
        report.skips.insert(report.skips.end(), o.skips.begin(), o.skips.end());
    }
    report.horizons = summarize(report.cells, spec.horizons);
    return report;
}

} // namespace bsp
