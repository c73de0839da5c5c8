#pragma once

#include "bsp/covariance.hpp"
#include "bsp/data.hpp"
#include "bsp/nelder_mead.hpp"
#include "bsp/pipeline.hpp"
#include "bsp/statespace.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace bsp {

/**
 * Multi-start settings for maximizing a log-likelihood over log-parameters. The default
 * bounds are for (log sigma2_obs, log sigma2_beta, log sigma2_a, log lambda).
 */
struct FitConfig {
    int n_starts = 10;
    int max_iters = 500;
    double penalty_strength = 1.0;
    double penalty_sd = 10.0;          // Gaussian penalty sd, centred at the middle of the bounds
    std::vector<optim::Interval> log_bounds{{-20.0, 5.0}, {-20.0, 5.0}, {-20.0, 5.0}, {-5.0, 5.0}};
    std::uint64_t rng_seed = 20240101;
    double f_tol = 1e-8;
    double x_tol = 1e-6;
    double initial_step = 0.5;

    void validate() const;
};

struct StartTrace {
    std::vector<double> start;     // log-parameters
    std::vector<double> optimum;   // log-parameters at termination
    double loglik = 0.0;           // unpenalized, at the optimum
    double objective = 0.0;        // penalized negative log-likelihood, at the optimum
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    bool failed = false;
    std::string error;
};

struct MultiStartResult {
    std::vector<double> best;      // log-parameters
    double best_loglik = 0.0;
    double best_objective = 0.0;
    std::size_t best_start = 0;
    std::vector<StartTrace> trace;
};

using LogLikelihood = std::function<double(std::span<const double>)>;

/**
 * Latin-hypercube starts, Nelder-Mead from each on the penalized negative log-likelihood,
 * best start by unpenalized log-likelihood (ties to the lowest index). Points outside the
 * bounds and evaluations that throw are rejected. Starts run in parallel.
 */
MultiStartResult maximize_multistart(const LogLikelihood& loglik, const FitConfig& config);

/// Penalty added to the negative log-likelihood at log-parameters theta.
double log_penalty(std::span<const double> theta, const FitConfig& config);

struct FitResult {
    HyperParams best;
    double best_loglik = 0.0;
    double best_objective = 0.0;
    std::size_t best_start = 0;
    std::vector<StartTrace> trace;
};

HyperParams from_log(std::span<const double> theta);
std::vector<double> to_log(const HyperParams& hp);

/// Marginal log-likelihood of the prepared data at hyperparameters hp.
double surface_loglik(const PreparedData& data, const CorrelationPair& correlations, const HyperParams& hp);

FitResult fit(const PreparedData& data, const CorrelationPair& correlations, const FitConfig& config);
FitResult fit(const MortalitySurface& surface, const BasisSet& basis, const CorrelationPair& correlations,
              const FitConfig& config);

} // namespace bsp
