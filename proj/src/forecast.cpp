#include "bsp/forecast.hpp"

#include "bsp/errors.hpp"
#include "bsp/simulate.hpp"
#include "bsp/stats.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace bsp {

namespace {

using Eigen::Index;

Eigen::VectorXd levels(const Eigen::VectorXd& state, int p) {
    Eigen::VectorXd out(p);
    for (int j = 0; j < p; ++j) {
        out[j] = state[StateLayout::level(j)];
    }
    return out;
}

Eigen::VectorXd slope_median(const std::vector<const Eigen::VectorXd*>& means, std::size_t first,
                             std::size_t last) {
    if (first > last || last >= means.size()) {
        throw std::invalid_argument("median window outside the smoothed series");
    }
    const Index p = means[first]->size() / 3;
    Eigen::VectorXd out(p);
    std::vector<double> values(last - first + 1);
    for (Index j = 0; j < p; ++j) {
        for (std::size_t s = first; s <= last; ++s) {
            values[s - first] = (*means[s])[StateLayout::slope(static_cast<int>(j))];
        }
        out[j] = median(values);
    }
    return out;
}

Eigen::Matrix2d drift_block(double lambda, double delta) {
    Eigen::Matrix2d t;
    t << 1.0, lambda * delta, 0.0, 1.0;
    return t;
}

std::vector<double> future_lags(std::span<const double> lags, int horizons) {
    if (lags.empty()) {
        return std::vector<double>(static_cast<std::size_t>(horizons), 1.0);
    }
    if (static_cast<int>(lags.size()) < horizons) {
        throw std::invalid_argument("need one lag per forecast horizon");
    }
    for (double d : lags) {
        if (!(d > 0.0)) {
            throw std::invalid_argument("forecast lags must be positive");
        }
    }
    return {lags.begin(), lags.begin() + horizons};
}

} // namespace

FitConfig DriftConfig::default_variance_fit() {
    FitConfig config;
    config.log_bounds = {{-20.0, 5.0}, {-20.0, 5.0}, {-20.0, 5.0}};
    config.rng_seed = 11;
    return config;
}

void DriftConfig::validate() const {
    if (window < 2) {
        throw std::invalid_argument("drift window must be at least 2");
    }
    if (n_draws < 2) {
        throw std::invalid_argument("n_draws must be at least 2");
    }
    variance_fit.validate();
    if (variance_fit.log_bounds.size() != 3) {
        throw std::invalid_argument("variance fit expects bounds for 3 log-parameters");
    }
}

Eigen::VectorXd median_drift(const std::vector<GaussianBelief>& smoothed, std::size_t first, std::size_t last) {
    std::vector<const Eigen::VectorXd*> means;
    means.reserve(smoothed.size());
    for (const auto& b : smoothed) {
        means.push_back(&b.mean);
    }
    return slope_median(means, first, last);
}

Eigen::VectorXd median_drift(const std::vector<Eigen::VectorXd>& smoothed_means, std::size_t first,
                             std::size_t last) {
    std::vector<const Eigen::VectorXd*> means;
    means.reserve(smoothed_means.size());
    for (const auto& m : smoothed_means) {
        means.push_back(&m);
    }
    return slope_median(means, first, last);
}

StateSpaceModel drift_state_space(const Eigen::MatrixXd& G, const Eigen::MatrixXd& rho_beta, double sigma2_omega,
                                  double sigma2_delta, double sigma2_psi, double lambda,
                                  std::span<const double> lags, const GaussianBelief& initial) {
    const Index p = G.cols();
    if (rho_beta.rows() != p || rho_beta.cols() != p) {
        throw std::domain_error("rho_beta does not match the number of splines");
    }
    if (initial.mean.size() != 2 * p || initial.cov.rows() != 2 * p) {
        throw std::domain_error("drift initial belief must have dimension 2p");
    }
    if (!(sigma2_psi > 0.0) || !(sigma2_omega >= 0.0) || !(sigma2_delta >= 0.0) || !(lambda > 0.0)) {
        throw std::domain_error("drift variances must be nonnegative, sigma2_psi and lambda positive");
    }
    StateSpaceModel model;
    model.Z = Eigen::MatrixXd::Zero(G.rows(), 2 * p);
    for (Index j = 0; j < p; ++j) {
        model.Z.col(2 * j) = G.col(j);
    }
    model.H = Eigen::VectorXd::Constant(G.rows(), sigma2_psi);
    model.initial = initial;
    model.lags.assign(lags.begin(), lags.end());
    model.block_size = 2;

    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2 * p, 2 * p);
    for (Index j = 0; j < p; ++j) {
        for (Index l = 0; l < p; ++l) {
            q(2 * j, 2 * l) = sigma2_omega * rho_beta(j, l);
        }
        q(2 * j + 1, 2 * j + 1) = sigma2_delta;
    }
    for (double delta : lags) {
        const Eigen::Matrix2d block = drift_block(lambda, delta);
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2 * p, 2 * p);
        for (Index j = 0; j < p; ++j) {
            t.block<2, 2>(2 * j, 2 * j) = block;
        }
        model.T.push_back(std::move(t));
        model.Q.push_back(q);
    }
    return model;
}

DriftModel build_drift_model(const PreparedData& data, const SmoothedSurface& fitted,
                             const CorrelationPair& correlations, const HyperParams& hp,
                             const DriftConfig& config) {
    config.validate();
    const auto n = static_cast<std::size_t>(data.obs.steps());
    const auto w = static_cast<std::size_t>(config.window);
    if (n < 2 * w) {
        throw InputError("drift model needs at least " + std::to_string(2 * w) + " time points, got " +
                         std::to_string(n));
    }
    const std::vector<GaussianBelief>& smoothed = fitted.smoothed.smoothed;
    if (smoothed.size() != n) {
        throw InputError("smoother result does not match the data length");
    }
    const int p = static_cast<int>(data.design.values.cols());

    DriftModel drift;
    drift.lambda_hat = hp.lambda;
    drift.rho_beta = correlations.rho_beta;
    drift.beta_start = levels(smoothed[n - 1].mean, p);
    drift.drift_start = median_drift(smoothed, n - w, n - 1);
    drift.window_first = n - w;
    drift.prior_first = n - 2 * w;

    // Delta prior: median slope over the preceding window and its spread across draws
    // from the smoothing distribution.
    drift.drift_prior_mean = median_drift(smoothed, n - 2 * w, n - w - 1);
    std::vector<Eigen::VectorXd> means(n);
    for (std::size_t s = 0; s < n; ++s) {
        means[s] = smoothed[s].mean;
    }
    std::mt19937_64 rng(config.seed);
    Eigen::MatrixXd medians(p, config.n_draws);
    for (int d = 0; d < config.n_draws; ++d) {
        const auto path = simulation_smoother_draw(fitted.model, fitted.filtered, means, data.obs, rng);
        medians.col(d) = median_drift(path, n - 2 * w, n - w - 1);
    }
    drift.drift_prior_var.resize(p);
    for (int j = 0; j < p; ++j) {
        std::vector<double> row(medians.cols());
        for (Index d = 0; d < medians.cols(); ++d) {
            row[static_cast<std::size_t>(d)] = medians(j, d);
        }
        drift.drift_prior_var[j] = sample_variance(row);
    }

    // beta at the first window year: one drift step from the smoothed beta of the year before,
    // with the BSP predictive covariance for that year.
    const std::size_t first = n - w;
    const double lag_before = data.lags[first - 1];
    const Eigen::VectorXd beta_before = levels(smoothed[first - 1].mean, p);
    const Eigen::MatrixXd& predicted_cov = fitted.filtered.steps[first].predicted.cov;
    GaussianBelief init;
    init.mean.resize(2 * p);
    init.cov = Eigen::MatrixXd::Zero(2 * p, 2 * p);
    for (int j = 0; j < p; ++j) {
        init.mean[2 * j] = beta_before[j] + hp.lambda * lag_before * drift.drift_prior_mean[j];
        init.mean[2 * j + 1] = drift.drift_prior_mean[j];
        for (int l = 0; l < p; ++l) {
            init.cov(2 * j, 2 * l) = predicted_cov(StateLayout::level(j), StateLayout::level(l));
        }
        init.cov(2 * j + 1, 2 * j + 1) = drift.drift_prior_var[j];
    }
    drift.window_initial = init;

    ObservationSeries window;
    window.values = data.obs.values.rightCols(static_cast<Index>(w));
    window.observed = data.obs.observed.rightCols(static_cast<Index>(w));
    const std::vector<double> window_lags(data.lags.end() - static_cast<std::ptrdiff_t>(w - 1), data.lags.end());
    const Eigen::MatrixXd& G = data.design.values;

    const auto model_at = [&](std::span<const double> theta) {
        return drift_state_space(G, correlations.rho_beta, std::exp(theta[0]), std::exp(theta[1]),
                                 std::exp(theta[2]), hp.lambda, window_lags, init);
    };
    const LogLikelihood ll = [&](std::span<const double> theta) { return loglik(model_at(theta), window); };
    MultiStartResult ms = maximize_multistart(ll, config.variance_fit);

    drift.sigma2_omega = std::exp(ms.best[0]);
    drift.sigma2_delta = std::exp(ms.best[1]);
    drift.sigma2_psi = std::exp(ms.best[2]);
    drift.W = drift.sigma2_omega * correlations.rho_beta;
    drift.variance_loglik = ms.best_loglik;
    drift.variance_trace = std::move(ms.trace);

    if (config.start == ForecastStart::Filtered) {
        const FilterResult run = filter(model_at(ms.best), window);
        drift.start_cov = run.steps.back().filtered.cov;
    } else {
        drift.start_cov = Eigen::MatrixXd::Zero(2 * p, 2 * p);
    }
    return drift;
}

ForecastResult forecast(const DriftModel& drift, const DesignMatrix& design, int horizons,
                        std::span<const double> lags) {
    if (horizons < 1) {
        throw std::invalid_argument("horizons must be at least 1");
    }
    const int p = drift.p();
    const Eigen::MatrixXd& G = design.values;
    if (G.cols() != p) {
        throw std::invalid_argument("design matrix does not match the drift model");
    }
    const std::vector<double> steps = future_lags(lags, horizons);

    Eigen::VectorXd mean(2 * p);
    for (int j = 0; j < p; ++j) {
        mean[2 * j] = drift.beta_start[j];
        mean[2 * j + 1] = drift.drift_start[j];
    }
    Eigen::MatrixXd cov = drift.start_cov.size() > 0 ? drift.start_cov : Eigen::MatrixXd::Zero(2 * p, 2 * p);

    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2 * p, 2 * p);
    for (int j = 0; j < p; ++j) {
        for (int l = 0; l < p; ++l) {
            q(2 * j, 2 * l) = drift.W(j, l);
        }
        q(2 * j + 1, 2 * j + 1) = drift.sigma2_delta;
    }

    ForecastResult out;
    Eigen::MatrixXd beta_cov(p, p);
    for (int h = 1; h <= horizons; ++h) {
        const Eigen::Matrix2d block = drift_block(drift.lambda_hat, steps[static_cast<std::size_t>(h - 1)]);
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(2 * p, 2 * p);
        for (int j = 0; j < p; ++j) {
            t.block<2, 2>(2 * j, 2 * j) = block;
        }
        mean = t * mean;
        cov = propagate_covariance(t, cov, 2) + q;
        symmetrize(cov);

        HorizonForecast f;
        f.horizon = h;
        f.coef_mean.resize(p);
        for (int j = 0; j < p; ++j) {
            f.coef_mean[j] = mean[2 * j];
            for (int l = 0; l < p; ++l) {
                beta_cov(j, l) = cov(2 * j, 2 * l);
            }
        }
        f.point = G * f.coef_mean;
        f.variance = (G * beta_cov).cwiseProduct(G).rowwise().sum().array() + drift.sigma2_psi;
        const Eigen::VectorXd half = kNormalQuantile975 * f.variance.cwiseSqrt();
        f.lower = f.point - half;
        f.upper = f.point + half;
        out.horizons.push_back(std::move(f));
    }
    return out;
}

ForecastResult predictive_forecast(const SmoothedSurface& fitted, const CorrelationPair& correlations,
                                   const HyperParams& hp, int horizons, std::span<const double> lags) {
    if (horizons < 1) {
        throw std::invalid_argument("horizons must be at least 1");
    }
    if (fitted.filtered.steps.empty()) {
        throw std::invalid_argument("empty filter result");
    }
    const std::vector<double> steps = future_lags(lags, horizons);
    const auto p = static_cast<int>(fitted.model.state_dim() / 3);
    GaussianBelief belief = fitted.filtered.steps.back().filtered;

    ForecastResult out;
    for (int h = 1; h <= horizons; ++h) {
        const double delta = steps[static_cast<std::size_t>(h - 1)];
        const Eigen::MatrixXd t = transition_matrix(p, hp.lambda, delta);
        belief.mean = t * belief.mean;
        belief.cov = propagate_covariance(t, belief.cov, 3) + process_noise(correlations, hp, delta);
        symmetrize(belief.cov);
        const GaussianBelief surface = project_to_surface(fitted.model, belief);

        HorizonForecast f;
        f.horizon = h;
        f.coef_mean = levels(belief.mean, p);
        f.point = surface.mean;
        f.variance = surface.cov.diagonal().array() + hp.sigma2_obs;
        const Eigen::VectorXd half = kNormalQuantile975 * f.variance.cwiseSqrt();
        f.lower = f.point - half;
        f.upper = f.point + half;
        out.horizons.push_back(std::move(f));
    }
    return out;
}

} // namespace bsp
