#include "doctest.h"

#include "bsp/basis.hpp"
#include "bsp/covariance.hpp"
#include "bsp/statespace.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

using namespace bsp;

namespace {

double max_abs(const Eigen::MatrixXd& m) {
    return m.cwiseAbs().maxCoeff();
}

} // namespace

TEST_CASE("transition block") {
    Eigen::Matrix3d expected;
    expected << 1, 1, 0.5, 0, 1, 1, 0, 0, 1;
    CHECK(max_abs(transition_block(1.0, 1.0) - expected) == 0.0);
    CHECK(max_abs(transition_block(2.0, 0.5) - expected) == 0.0);
    CHECK(max_abs(transition_block(1.0, 1e-12) - Eigen::Matrix3d::Identity()) < 1e-11);
    CHECK_THROWS_AS(transition_block(0.0, 1.0), std::domain_error);
    CHECK_THROWS_AS(transition_block(1.0, -1.0), std::domain_error);
}

TEST_CASE("process noise block") {
    HyperParams hp;
    hp.sigma2_beta = 1.0;
    hp.sigma2_a = 1e-300;
    Eigen::Matrix3d slope;
    slope << 1.0 / 3, 0.5, 0, 0.5, 1, 0, 0, 0, 0;
    CHECK(max_abs(process_noise_block(hp, 1.0, 0.0, 1.0) - slope) < 1e-15);
    CHECK(max_abs(process_noise_block(hp, 0.0, 0.0, 1.0)) == 0.0);

    hp.sigma2_a = 1.0;
    const double d = 2.0;
    Eigen::Matrix3d both;
    both << d * d * d / 3 + std::pow(d, 5) / 20, d * d / 2 + std::pow(d, 4) / 8, d * d * d / 6,
        d * d / 2 + std::pow(d, 4) / 8, d + d * d * d / 3, d * d / 2,
        d * d * d / 6, d * d / 2, d;
    CHECK(max_abs(process_noise_block(hp, 1.0, 1.0, d) - both) < 1e-13);
    CHECK_THROWS_AS(process_noise_block(hp, 1.0, 1.0, 0.0), std::domain_error);
}

TEST_CASE("assembled model structure") {
    const BasisSet b = build_default_basis();
    const CorrelationPair corr = build_correlations(b, KernelConfig{});
    HyperParams hp{0.01, 0.2, 0.3, 0.7};
    const std::vector<double> ages = integer_ages(0, 100);
    const std::vector<double> lags{1.0, 1.0, 2.0};
    GaussianBelief init{Eigen::VectorXd::Zero(60), 10.0 * Eigen::MatrixXd::Identity(60, 60)};
    const StateSpaceModel m = assemble(b, corr, hp, lags, ages, init);

    CHECK(m.state_dim() == 60);
    CHECK(m.obs_dim() == 101);
    CHECK(m.time_points() == 4);
    REQUIRE(m.T.size() == 3);
    const DesignMatrix d = design_matrix(b, ages);
    for (int j = 0; j < 20; ++j) {
        CHECK(max_abs(m.Z.col(StateLayout::level(j)) - d.values.col(j)) == 0.0);
        CHECK(m.Z.col(StateLayout::slope(j)).isZero(0.0));
        CHECK(m.Z.col(StateLayout::local_mean(j)).isZero(0.0));
    }
    CHECK((m.H.array() == 0.01).all());
    for (std::size_t s = 0; s < 3; ++s) {
        const double delta = lags[s];
        for (int j = 0; j < 20; ++j) {
            for (int l = 0; l < 20; ++l) {
                const Eigen::Matrix3d t = m.T[s].block<3, 3>(3 * j, 3 * l);
                if (j == l) {
                    CHECK(max_abs(t - transition_block(hp.lambda, delta)) == 0.0);
                } else {
                    CHECK(t.isZero(0.0));
                }
                const Eigen::Matrix3d q = m.Q[s].block<3, 3>(3 * j, 3 * l);
                CHECK(max_abs(q - process_noise_block(hp, corr.rho_beta(j, l), corr.rho_a(j, l), delta)) < 1e-15);
            }
        }
        CHECK(max_abs(m.Q[s] - m.Q[s].transpose()) == 0.0);
    }
}

TEST_CASE("off-diagonal noise block with identity local-mean correlation") {
    HyperParams hp{1.0, 1.0, 1.0, 1.0};
    CorrelationPair corr;
    corr.rho_beta = Eigen::Matrix2d{{1.0, 0.5}, {0.5, 1.0}};
    corr.rho_a = Eigen::Matrix2d::Identity();
    const Eigen::MatrixXd q = process_noise(corr, hp, 1.0);
    const Eigen::Matrix3d off = q.block<3, 3>(0, 3);
    CHECK(off.row(2).isZero(0.0));
    CHECK(off.col(2).isZero(0.0));
    CHECK(off(0, 0) == doctest::Approx(0.5 / 3.0));
    CHECK(off(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("random Q is PSD and T depends on lambda delta only") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const BasisSet b = build_default_basis();
    for (int trial = 0; trial < 200; ++trial) {
        KernelConfig c;
        c.smoothness = 0.3 + 3.0 * u(rng);
        c.length_scale = 0.5 + 30.0 * u(rng);
        const CorrelationPair corr = build_correlations(b, c, trial % 2 ? std::optional<KernelConfig>(c) : std::nullopt);
        HyperParams hp{1.0, std::exp(-6 + 8 * u(rng)), std::exp(-6 + 8 * u(rng)), std::exp(-2 + 3 * u(rng))};
        const double delta = 0.2 + 2.0 * u(rng);
        const Eigen::MatrixXd q = process_noise(corr, hp, delta);
        const double scale = q.diagonal().maxCoeff();
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().minCoeff() >= -1e-8 * std::max(1.0, scale));

        const Eigen::MatrixXd t1 = transition_matrix(3, hp.lambda, delta);
        const Eigen::MatrixXd t2 = transition_matrix(3, 2.0 * hp.lambda, 0.5 * delta);
        CHECK(max_abs(t1 - t2) < 1e-14);
    }
}

TEST_CASE("initial belief from the first full year") {
    const BasisSet b = build_default_basis();
    const DesignMatrix d = design_matrix(b, integer_ages(0, 100));
    Eigen::VectorXd beta(20);
    for (int j = 0; j < 20; ++j) {
        beta[j] = -8.0 + 0.3 * j;
    }
    ObservationSeries obs;
    obs.values.resize(101, 3);
    obs.observed.setConstant(101, 3, true);
    obs.observed.col(0).setConstant(false);
    for (int s = 0; s < 3; ++s) {
        obs.values.col(s) = d.values * beta;
    }
    const GaussianBelief init = initial_belief_from_data(d, obs);
    for (int j = 0; j < 20; ++j) {
        CHECK(init.mean[StateLayout::level(j)] == doctest::Approx(beta[j]).epsilon(1e-10));
        CHECK(init.mean[StateLayout::slope(j)] == 0.0);
        CHECK(init.mean[StateLayout::local_mean(j)] == 0.0);
    }
    CHECK(max_abs(init.cov - 10.0 * Eigen::MatrixXd::Identity(60, 60)) == 0.0);
}

TEST_CASE("lags from years") {
    const std::vector<int> years{1990, 1991, 1993};
    const std::vector<double> lags = lags_from_years(years);
    REQUIRE(lags.size() == 2);
    CHECK(lags[0] == 1.0);
    CHECK(lags[1] == 2.0);
    const std::vector<int> bad{1990, 1990};
    CHECK_THROWS(lags_from_years(bad));
    HyperParams hp{1.0, 0.0, 1.0, 1.0};
    CHECK_THROWS_AS(hp.validate(), std::domain_error);
}
