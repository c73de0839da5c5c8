#pragma once

#include "bsp/basis.hpp"
#include "bsp/covariance.hpp"

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace bsp {

/// Continuous hyperparameters of the coefficient process and the observation noise.
struct HyperParams {
    double sigma2_obs = 1.0;   // variance of log-rates around the spline surface
    double sigma2_beta = 1.0;  // slope noise scale
    double sigma2_a = 1.0;     // local-mean noise scale
    double lambda = 1.0;       // time length-scale

    void validate() const;
};

/**
 * Interleaved state ordering: for spline j (0-based) the level beta_j sits at 3j,
 * its time derivative at 3j+1 and the local instantaneous mean a_j at 3j+2.
 */
struct StateLayout {
    int p = 0;

    int dimension() const { return 3 * p; }
    static int level(int j) { return 3 * j; }
    static int slope(int j) { return 3 * j + 1; }
    static int local_mean(int j) { return 3 * j + 2; }
};

struct GaussianBelief {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

/// Observation series with an explicit mask; column s holds the k log-rates at time t_s.
struct ObservationSeries {
    Eigen::MatrixXd values;
    Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> observed;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index steps() const { return values.cols(); }
};

/**
 * Linear Gaussian state-space model
 *
 *   y_s     = Z b_s + nu_s,   nu_s ~ N(0, diag(H))
 *   b_{s+1} = T_s b_s + eta_s, eta_s ~ N(0, Q_s)
 *
 * with b_1 ~ initial. T and Q hold one matrix per lag (n - 1 of them for n time points).
 * `block_size` > 0 records that every T_s is block diagonal with square blocks of that
 * size, which the filter exploits.
 */
struct StateSpaceModel {
    Eigen::MatrixXd Z;
    Eigen::VectorXd H;
    std::vector<Eigen::MatrixXd> T;
    std::vector<Eigen::MatrixXd> Q;
    GaussianBelief initial;
    std::vector<double> lags;
    int block_size = 0;

    Eigen::Index state_dim() const { return Z.cols(); }
    Eigen::Index obs_dim() const { return Z.rows(); }
    std::size_t time_points() const { return lags.size() + 1; }
};

/// [[1, l d, (l d)^2 / 2], [0, 1, l d], [0, 0, 1]] with l = lambda, d = delta.
Eigen::Matrix3d transition_block(double lambda, double delta);

/// (j, l) block of the process noise for correlations rho_b, rho_a and lag delta.
Eigen::Matrix3d process_noise_block(const HyperParams& hp, double rho_b, double rho_a, double delta);

Eigen::MatrixXd transition_matrix(int p, double lambda, double delta);
Eigen::MatrixXd process_noise(const CorrelationPair& correlations, const HyperParams& hp, double delta);

/// k x 3p observation matrix: design-matrix column j at the level position of spline j.
Eigen::MatrixXd observation_matrix(const DesignMatrix& design);

/**
 * Initial belief for t_1: levels from least squares of the first sufficiently observed
 * year's log-rates on the design matrix, slopes and local means zero, covariance
 * `variance` * I.
 */
GaussianBelief initial_belief_from_data(const DesignMatrix& design, const ObservationSeries& obs,
                                        double variance = 10.0);

StateSpaceModel assemble(const BasisSet& basis, const CorrelationPair& correlations,
                         const HyperParams& hp, std::span<const double> lags,
                         std::span<const double> ages, const GaussianBelief& initial);

/// Same, reusing an already evaluated design matrix.
StateSpaceModel assemble(const DesignMatrix& design, const CorrelationPair& correlations,
                         const HyperParams& hp, std::span<const double> lags,
                         const GaussianBelief& initial);

/// Lags between consecutive years (all ones for a yearly grid).
std::vector<double> lags_from_years(std::span<const int> years);

/// Symmetric part of m, in place.
void symmetrize(Eigen::MatrixXd& m);

} // namespace bsp
