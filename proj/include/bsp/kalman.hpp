#pragma once

#include "bsp/statespace.hpp"

#include <Eigen/Dense>

#include <vector>

namespace bsp {

/**
 * One time step of the forward pass.
 *
 * When `reduced` is set, the observed rows were first collapsed onto the columns of Z that
 * load on the state (generalized least squares of y on those columns); `innovation`,
 * `innovation_cov`, `loading` and `gain` are then expressed in that collapsed space. The
 * beliefs and the log-likelihood are identical to the uncollapsed recursion.
 */
struct FilterStep {
    GaussianBelief predicted;
    GaussianBelief filtered;
    Eigen::VectorXd innovation;
    Eigen::MatrixXd innovation_cov;
    double loglik = 0.0;
    Eigen::Index observed_count = 0;
    bool reduced = false;

    std::vector<Eigen::Index> rows;   // observed rows of y
    Eigen::MatrixXd reducer;          // collapsed observation = reducer * y[rows]; empty if not reduced
    Eigen::MatrixXd loading;          // effective observation matrix
    Eigen::MatrixXd innovation_inv;
    Eigen::MatrixXd gain;             // predicted.cov * loading' * innovation_inv
};

struct FilterResult {
    std::vector<FilterStep> steps;
    double loglik = 0.0;
};

struct SmootherResult {
    std::vector<GaussianBelief> smoothed;
    std::vector<Eigen::VectorXd> r;   // r_{s-1}: information from steps s..n, as used at step s
    std::vector<Eigen::MatrixXd> V;
};

struct FilterOptions {
    bool collapse = true;   // disable to run the textbook k-dimensional update everywhere
};

FilterResult filter(const StateSpaceModel& model, const ObservationSeries& obs,
                    const FilterOptions& options = {});

/// Prediction-error decomposition of the marginal log-likelihood without storing beliefs.
double loglik(const StateSpaceModel& model, const ObservationSeries& obs,
              const FilterOptions& options = {});

SmootherResult smooth(const StateSpaceModel& model, const FilterResult& filtered);

/**
 * Smoothed state means for another data set sharing the missing-data pattern of the one
 * that produced `filtered`. Gains and covariances do not depend on the values, so only the
 * mean recursions are rerun.
 */
std::vector<Eigen::VectorXd> smoothed_means(const StateSpaceModel& model, const FilterResult& filtered,
                                            const ObservationSeries& obs);

/// Law of f = Z b for b ~ belief.
GaussianBelief project_to_surface(const StateSpaceModel& model, const GaussianBelief& belief);

/// T * m * T' using the block structure of the model when available.
Eigen::MatrixXd propagate_covariance(const Eigen::MatrixXd& transition, const Eigen::MatrixXd& cov,
                                     int block_size);

} // namespace bsp
