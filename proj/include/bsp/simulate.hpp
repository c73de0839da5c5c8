#pragma once

#include "bsp/basis.hpp"
#include "bsp/covariance.hpp"
#include "bsp/data.hpp"
#include "bsp/kalman.hpp"
#include "bsp/statespace.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace bsp {

enum class SimMode { Gaussian, Poisson };

SimMode parse_sim_mode(const std::string& name);
std::string to_string(SimMode mode);

/**
 * Generative settings. Variances may be zero here (a degenerate but valid simulation);
 * lambda must be positive. `initial` is the law of the first state (dimension 3p).
 */
struct SimConfig {
    HyperParams hp;
    BasisSet basis;
    CorrelationPair correlations;
    GaussianBelief initial;
    std::vector<int> ages;              // defaults to 0..100 when empty
    int first_year = 1933;
    int n_years = 80;
    double exposure = 1e6;              // used when exposure_grid is empty
    Eigen::MatrixXd exposure_grid;      // ages x years, optional
    std::uint64_t seed = 1;
    SimMode mode = SimMode::Gaussian;
    Gender gender = Gender::Female;
    std::string country_code = "SIM";
};

struct SimResult {
    MortalitySurface surface;
    std::vector<Eigen::VectorXd> states;   // true b_{t_s}, s = 1..n
    Eigen::MatrixXd f;                     // ages x years, Z b_{t_s}
    Eigen::MatrixXd log_mean_rates;        // ages x years, f plus the lognormal perturbation
};

SimResult simulate_surface(const SimConfig& config);

/// Smooth log-mortality schedule over ages, a plausible level for synthetic surfaces.
Eigen::VectorXd reference_log_rates(std::span<const double> ages);

/**
 * Initial state law centred on a spline fit of `reference_log_rates`: levels from least
 * squares, slopes and local means zero, covariance `variance` * I except on the levels when
 * `level_variance` is given.
 */
GaussianBelief reference_initial_belief(const BasisSet& basis, std::span<const double> ages, double variance,
                                        std::optional<double> level_variance = std::nullopt);

/// One joint draw of b_{t_1..t_n} from the model's prior.
std::vector<Eigen::VectorXd> simulate_states(const StateSpaceModel& model, std::mt19937_64& rng);

/**
 * One joint draw from the smoothing distribution (mean-correction simulation smoother).
 * `smoothed` holds the smoothed means of the real data; `filtered` is its filter run.
 */
std::vector<Eigen::VectorXd> simulation_smoother_draw(const StateSpaceModel& model,
                                                      const FilterResult& filtered,
                                                      const std::vector<Eigen::VectorXd>& smoothed,
                                                      const ObservationSeries& obs, std::mt19937_64& rng);

struct Prop1Row {
    double exposure = 0.0;
    double ks_distance = 0.0;
};

/**
 * For each exposure E draws log(d / E) with d ~ Poisson(E exp(f + sigma z)), z ~ N(0, 1),
 * and reports the Kolmogorov-Smirnov distance to N(f, sigma^2). Zero counts give -inf.
 */
std::vector<Prop1Row> check_prop1(std::span<const double> exposures, int n_draws, double f, double sigma,
                                  std::uint64_t seed);

} // namespace bsp
