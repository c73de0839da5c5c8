#include "bsp/statespace.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace bsp {

namespace {

void require_positive(double value, const char* name) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw std::domain_error(std::string(name) + " must be positive and finite");
    }
}

Eigen::Matrix3d slope_noise_shape(double lambda, double delta) {
    const double d2 = delta * delta;
    const double d3 = d2 * delta;
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    m(0, 0) = d3 / 3.0 * lambda * lambda;
    m(0, 1) = m(1, 0) = d2 / 2.0 * lambda;
    m(1, 1) = delta;
    return m;
}

Eigen::Matrix3d local_mean_noise_shape(double lambda, double delta) {
    const double d2 = delta * delta;
    const double d3 = d2 * delta;
    const double d4 = d3 * delta;
    const double d5 = d4 * delta;
    const double l2 = lambda * lambda;
    const double l3 = l2 * lambda;
    const double l4 = l3 * lambda;
    Eigen::Matrix3d m;
    m(0, 0) = d5 / 20.0 * l4;
    m(0, 1) = m(1, 0) = d4 / 8.0 * l3;
    m(0, 2) = m(2, 0) = d3 / 6.0 * l2;
    m(1, 1) = d3 / 3.0 * l2;
    m(1, 2) = m(2, 1) = d2 / 2.0 * lambda;
    m(2, 2) = delta;
    return m;
}

} // namespace

void HyperParams::validate() const {
    require_positive(sigma2_obs, "sigma2_obs");
    require_positive(sigma2_beta, "sigma2_beta");
    require_positive(sigma2_a, "sigma2_a");
    require_positive(lambda, "lambda");
}

Eigen::Matrix3d transition_block(double lambda, double delta) {
    require_positive(lambda, "lambda");
    require_positive(delta, "lag");
    const double ld = lambda * delta;
    Eigen::Matrix3d t;
    t << 1.0, ld, lambda * lambda * (delta * delta / 2.0),
         0.0, 1.0, ld,
         0.0, 0.0, 1.0;
    return t;
}

Eigen::Matrix3d process_noise_block(const HyperParams& hp, double rho_b, double rho_a, double delta) {
    require_positive(delta, "lag");
    return hp.sigma2_beta * rho_b * slope_noise_shape(hp.lambda, delta) +
           hp.sigma2_a * rho_a * local_mean_noise_shape(hp.lambda, delta);
}

Eigen::MatrixXd transition_matrix(int p, double lambda, double delta) {
    const Eigen::Matrix3d block = transition_block(lambda, delta);
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(3 * p, 3 * p);
    for (int j = 0; j < p; ++j) {
        t.block<3, 3>(3 * j, 3 * j) = block;
    }
    return t;
}

Eigen::MatrixXd process_noise(const CorrelationPair& correlations, const HyperParams& hp, double delta) {
    require_positive(delta, "lag");
    const auto p = correlations.rho_beta.rows();
    if (correlations.rho_beta.cols() != p || correlations.rho_a.rows() != p ||
        correlations.rho_a.cols() != p) {
        throw std::domain_error("correlation matrices must be square and of equal size");
    }
    const Eigen::Matrix3d slope = hp.sigma2_beta * slope_noise_shape(hp.lambda, delta);
    const Eigen::Matrix3d local = hp.sigma2_a * local_mean_noise_shape(hp.lambda, delta);
    Eigen::MatrixXd q(3 * p, 3 * p);
    for (Eigen::Index j = 0; j < p; ++j) {
        for (Eigen::Index l = 0; l < p; ++l) {
            q.block<3, 3>(3 * j, 3 * l) =
                correlations.rho_beta(j, l) * slope + correlations.rho_a(j, l) * local;
        }
    }
    return q;
}

Eigen::MatrixXd observation_matrix(const DesignMatrix& design) {
    const auto k = design.values.rows();
    const auto p = design.values.cols();
    Eigen::MatrixXd z = Eigen::MatrixXd::Zero(k, 3 * p);
    for (Eigen::Index j = 0; j < p; ++j) {
        z.col(StateLayout::level(static_cast<int>(j))) = design.values.col(j);
    }
    return z;
}

GaussianBelief initial_belief_from_data(const DesignMatrix& design, const ObservationSeries& obs,
                                        double variance) {
    const auto k = design.values.rows();
    const auto p = design.values.cols();
    if (obs.rows() != k) {
        throw std::domain_error("observation rows do not match the design matrix");
    }
    GaussianBelief belief;
    belief.mean = Eigen::VectorXd::Zero(3 * p);
    belief.cov = variance * Eigen::MatrixXd::Identity(3 * p, 3 * p);

    for (Eigen::Index s = 0; s < obs.steps(); ++s) {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < k; ++i) {
            if (obs.observed(i, s)) {
                rows.push_back(i);
            }
        }
        if (static_cast<Eigen::Index>(rows.size()) < p) {
            continue;
        }
        Eigen::MatrixXd g(rows.size(), p);
        Eigen::VectorXd y(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            g.row(static_cast<Eigen::Index>(r)) = design.values.row(rows[r]);
            y[static_cast<Eigen::Index>(r)] = obs.values(rows[r], s);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
        if (qr.rank() < p) {
            continue;
        }
        const Eigen::VectorXd beta = qr.solve(y);
        for (Eigen::Index j = 0; j < p; ++j) {
            belief.mean[StateLayout::level(static_cast<int>(j))] = beta[j];
        }
        return belief;
    }
    throw std::domain_error("no time point has enough observed ages for the initial regression");
}

StateSpaceModel assemble(const BasisSet& basis, const CorrelationPair& correlations,
                         const HyperParams& hp, std::span<const double> lags,
                         std::span<const double> ages, const GaussianBelief& initial) {
    return assemble(design_matrix(basis, ages), correlations, hp, lags, initial);
}

StateSpaceModel assemble(const DesignMatrix& design, const CorrelationPair& correlations,
                         const HyperParams& hp, std::span<const double> lags,
                         const GaussianBelief& initial) {
    hp.validate();
    const auto p = design.values.cols();
    if (correlations.rho_beta.rows() != p || correlations.rho_a.rows() != p) {
        throw std::domain_error("correlations do not match the basis size");
    }
    if (initial.mean.size() != 3 * p || initial.cov.rows() != 3 * p || initial.cov.cols() != 3 * p) {
        throw std::domain_error("initial belief must have dimension 3p");
    }

    StateSpaceModel model;
    model.Z = observation_matrix(design);
    model.H = Eigen::VectorXd::Constant(model.Z.rows(), hp.sigma2_obs);
    model.initial = initial;
    model.lags.assign(lags.begin(), lags.end());
    model.block_size = 3;

    // Yearly grids repeat the same lag; build each distinct pair of matrices once.
    std::map<double, std::size_t> seen;
    std::vector<Eigen::MatrixXd> distinct_t;
    std::vector<Eigen::MatrixXd> distinct_q;
    model.T.reserve(lags.size());
    model.Q.reserve(lags.size());
    for (double delta : lags) {
        require_positive(delta, "lag");
        auto [it, inserted] = seen.try_emplace(delta, distinct_t.size());
        if (inserted) {
            distinct_t.push_back(transition_matrix(static_cast<int>(p), hp.lambda, delta));
            distinct_q.push_back(process_noise(correlations, hp, delta));
        }
        model.T.push_back(distinct_t[it->second]);
        model.Q.push_back(distinct_q[it->second]);
    }
    return model;
}

std::vector<double> lags_from_years(std::span<const int> years) {
    std::vector<double> lags;
    for (std::size_t s = 1; s < years.size(); ++s) {
        const int d = years[s] - years[s - 1];
        if (d <= 0) {
            throw std::domain_error("years must be strictly increasing");
        }
        lags.push_back(static_cast<double>(d));
    }
    return lags;
}

void symmetrize(Eigen::MatrixXd& m) {
    m = 0.5 * (m + m.transpose()).eval();
}

} // namespace bsp
