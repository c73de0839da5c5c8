#pragma once

#include "oracle.hpp"

#include "bsp/covariance.hpp"
#include "bsp/statespace.hpp"

#include <limits>
#include <random>

namespace instances {

struct Instance {
    bsp::StateSpaceModel model;
    bsp::ObservationSeries obs;
};

// Exponential-kernel correlations over random points: PSD with entries in (0, 1].
inline Eigen::MatrixXd random_correlation(Eigen::Index p, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> points(static_cast<std::size_t>(p));
    for (auto& x : points) {
        x = 10.0 * u(rng);
    }
    bsp::KernelConfig config;
    config.length_scale = 1.0 + 4.0 * u(rng);
    return bsp::correlation_matrix(points, config);
}

/**
 * Random BSP-structured instance with 3 p n <= max_cells: random level loadings, random
 * lags, random hyperparameters and a random missing pattern (unobserved cells hold NaN).
 */
inline Instance random_instance(std::mt19937_64& rng, int max_cells = 60) {
    std::uniform_int_distribution<int> pick_p(1, 3);
    const int p = pick_p(rng);
    std::uniform_int_distribution<int> pick_n(2, max_cells / (3 * p));
    const int n = pick_n(rng);
    std::uniform_int_distribution<int> pick_k(1, 7);
    const int k = pick_k(rng);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    bsp::HyperParams hp;
    hp.sigma2_obs = 0.05 + u(rng);
    hp.sigma2_beta = 0.05 + u(rng);
    hp.sigma2_a = 0.05 + u(rng);
    hp.lambda = 0.3 + 1.2 * u(rng);

    bsp::CorrelationPair corr;
    corr.rho_beta = random_correlation(p, rng);
    corr.rho_a = Eigen::MatrixXd::Identity(p, p);

    Instance inst;
    bsp::StateSpaceModel& model = inst.model;
    model.Z = Eigen::MatrixXd::Zero(k, 3 * p);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < p; ++j) {
            model.Z(i, bsp::StateLayout::level(j)) = u(rng);
        }
    }
    model.H.resize(k);
    for (int i = 0; i < k; ++i) {
        model.H[i] = hp.sigma2_obs * (0.5 + u(rng));
    }
    std::normal_distribution<double> z(0.0, 1.0);
    model.initial.mean.resize(3 * p);
    for (int i = 0; i < 3 * p; ++i) {
        model.initial.mean[i] = z(rng);
    }
    model.initial.cov = oracle::random_spd(3 * p, rng, 0.5);
    model.block_size = 3;
    for (int s = 0; s + 1 < n; ++s) {
        const double delta = 0.5 + u(rng);
        model.lags.push_back(delta);
        model.T.push_back(bsp::transition_matrix(p, hp.lambda, delta));
        model.Q.push_back(bsp::process_noise(corr, hp, delta));
    }

    inst.obs.values.resize(k, n);
    inst.obs.observed.resize(k, n);
    const bool blank_step = u(rng) < 0.3;
    const int blank = static_cast<int>(u(rng) * n);
    for (int s = 0; s < n; ++s) {
        for (int i = 0; i < k; ++i) {
            const bool seen = !(blank_step && s == blank) && u(rng) > 0.2;
            inst.obs.observed(i, s) = seen;
            inst.obs.values(i, s) = seen ? 2.0 * z(rng) : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return inst;
}

} // namespace instances
