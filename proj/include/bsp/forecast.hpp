#pragma once

#include "bsp/basis.hpp"
#include "bsp/covariance.hpp"
#include "bsp/estimation.hpp"
#include "bsp/kalman.hpp"
#include "bsp/pipeline.hpp"
#include "bsp/statespace.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <vector>

namespace bsp {

inline constexpr double kNormalQuantile975 = 1.959964;

/// How the forecast covariance of (beta, Delta) at the last observed year is set.
enum class ForecastStart {
    Filtered,   // filtered covariance of the drift model over the variance window
    PointMass   // zero: beta-hat and Delta-hat treated as known
};

struct DriftConfig {
    int window = 25;
    int n_draws = 200;
    std::uint64_t seed = 7;
    FitConfig variance_fit = default_variance_fit();
    ForecastStart start = ForecastStart::Filtered;

    /// Bounds for (log sigma2_omega, log sigma2_delta, log sigma2_psi).
    static FitConfig default_variance_fit();
    void validate() const;
};

/**
 * Random walk plus drift on the spline coefficients:
 *   beta_{s+1}  = beta_s + lambda_hat delta_s Delta_s + omega_s,   omega_s ~ N(0, W)
 *   Delta_{s+1} = Delta_s + eps_s,                                eps_s ~ N(0, sigma2_delta I)
 *   log m_s     = G beta_s + nu_s,                                nu_s ~ N(0, sigma2_psi I)
 * with W = sigma2_omega * rho_beta.
 */
struct DriftModel {
    Eigen::VectorXd beta_start;     // smoothed beta at t_n
    Eigen::VectorXd drift_start;    // median smoothed slope over the last `window` years
    Eigen::MatrixXd rho_beta;
    Eigen::MatrixXd W;
    double sigma2_omega = 0.0;
    double sigma2_delta = 0.0;
    double sigma2_psi = 0.0;
    double lambda_hat = 1.0;

    /// Covariance of the interleaved (beta_j, Delta_j) state at t_n used by forecast().
    Eigen::MatrixXd start_cov;

    // Variance-estimation stage.
    GaussianBelief window_initial;  // law of the interleaved state at the first window year
    Eigen::VectorXd drift_prior_mean;
    Eigen::VectorXd drift_prior_var;
    double variance_loglik = 0.0;
    std::vector<StartTrace> variance_trace;
    std::size_t window_first = 0;   // index of t_{n-window+1}
    std::size_t prior_first = 0;    // index of the first year of the preceding window

    int p() const { return static_cast<int>(beta_start.size()); }
};

/// Per-spline median of the smoothed slopes over time indices [first, last].
Eigen::VectorXd median_drift(const std::vector<GaussianBelief>& smoothed, std::size_t first, std::size_t last);
Eigen::VectorXd median_drift(const std::vector<Eigen::VectorXd>& smoothed_means, std::size_t first,
                             std::size_t last);

/**
 * State-space form of the drift model on an interleaved 2p state, for observation matrix G
 * (k x p) and the given lags.
 */
StateSpaceModel drift_state_space(const Eigen::MatrixXd& G, const Eigen::MatrixXd& rho_beta, double sigma2_omega,
                                  double sigma2_delta, double sigma2_psi, double lambda,
                                  std::span<const double> lags, const GaussianBelief& initial);

/**
 * Builds the drift model from a fitted BSP smoother run. Needs at least 2 * window time
 * points: the last `window` years estimate the variances and the drift, the `window` years
 * before them initialize Delta.
 */
DriftModel build_drift_model(const PreparedData& data, const SmoothedSurface& fitted,
                             const CorrelationPair& correlations, const HyperParams& hp,
                             const DriftConfig& config = {});

struct HorizonForecast {
    int horizon = 0;
    Eigen::VectorXd point;      // k
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    Eigen::VectorXd variance;   // predictive variance of log m, per age
    Eigen::VectorXd coef_mean;  // p
};

struct ForecastResult {
    std::vector<HorizonForecast> horizons;
};

/**
 * Forecasts horizons 1..H. `lags` gives delta for each future step; empty means all ones.
 * Bounds are point -/+ 1.959964 * sqrt(diag(G C_h G') + sigma2_psi).
 */
ForecastResult forecast(const DriftModel& drift, const DesignMatrix& design, int horizons,
                        std::span<const double> lags = {});

/**
 * Comparison mode: the BSP one-step predictive recursion iterated from the last filtered
 * belief, with bounds from Z P Z' + sigma2_obs.
 */
ForecastResult predictive_forecast(const SmoothedSurface& fitted, const CorrelationPair& correlations,
                                   const HyperParams& hp, int horizons, std::span<const double> lags = {});

} // namespace bsp
