#pragma once

// Brute-force reference for small state-space instances: stack every state and every
// observed coordinate into one Gaussian vector and condition directly.

#include "bsp/kalman.hpp"
#include "bsp/statespace.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

struct Joint {
    Eigen::VectorXd state_mean;   // (m n)
    Eigen::MatrixXd state_cov;
    Eigen::VectorXd obs_mean;     // observed coordinates only, time-major
    Eigen::MatrixXd obs_cov;
    Eigen::MatrixXd cross;        // Cov(states, observations)
    Eigen::VectorXd y;
    std::vector<int> obs_time;    // time index of each observed coordinate
};

inline Joint build(const bsp::StateSpaceModel& model, const bsp::ObservationSeries& obs) {
    const Eigen::Index m = model.state_dim();
    const Eigen::Index n = obs.steps();
    std::vector<Eigen::VectorXd> mean(n);
    std::vector<Eigen::MatrixXd> var(n);
    mean[0] = model.initial.mean;
    var[0] = model.initial.cov;
    for (Eigen::Index s = 1; s < n; ++s) {
        mean[s] = model.T[s - 1] * mean[s - 1];
        var[s] = model.T[s - 1] * var[s - 1] * model.T[s - 1].transpose() + model.Q[s - 1];
    }
    Joint j;
    j.state_mean.resize(m * n);
    j.state_cov.resize(m * n, m * n);
    for (Eigen::Index s = 0; s < n; ++s) {
        j.state_mean.segment(s * m, m) = mean[s];
        Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(m, m);   // Cov(b_t, b_s) = phi(t, s) var_s
        for (Eigen::Index t = s; t < n; ++t) {
            if (t > s) {
                phi = model.T[t - 1] * phi;
            }
            const Eigen::MatrixXd c = phi * var[s];
            j.state_cov.block(t * m, s * m, m, m) = c;
            j.state_cov.block(s * m, t * m, m, m) = c.transpose();
        }
    }

    std::vector<std::pair<Eigen::Index, Eigen::Index>> coords;
    for (Eigen::Index s = 0; s < n; ++s) {
        for (Eigen::Index i = 0; i < obs.rows(); ++i) {
            if (obs.observed(i, s)) {
                coords.emplace_back(s, i);
            }
        }
    }
    const auto d = static_cast<Eigen::Index>(coords.size());
    Eigen::MatrixXd load = Eigen::MatrixXd::Zero(d, m * n);
    j.y.resize(d);
    Eigen::VectorXd noise(d);
    for (Eigen::Index r = 0; r < d; ++r) {
        const auto [s, i] = coords[static_cast<std::size_t>(r)];
        load.block(r, s * m, 1, m) = model.Z.row(i);
        j.y[r] = obs.values(i, s);
        noise[r] = model.H[i];
        j.obs_time.push_back(static_cast<int>(s));
    }
    j.obs_mean = load * j.state_mean;
    j.cross = j.state_cov * load.transpose();
    j.obs_cov = load * j.cross;
    j.obs_cov.diagonal() += noise;
    return j;
}

/// Law of b_s given the observed coordinates with time index <= upto (all when absent).
inline bsp::GaussianBelief condition(const Joint& j, Eigen::Index m, Eigen::Index s,
                                     std::optional<int> upto = std::nullopt) {
    std::vector<Eigen::Index> keep;
    for (std::size_t r = 0; r < j.obs_time.size(); ++r) {
        if (!upto || j.obs_time[r] <= *upto) {
            keep.push_back(static_cast<Eigen::Index>(r));
        }
    }
    bsp::GaussianBelief out;
    out.mean = j.state_mean.segment(s * m, m);
    out.cov = j.state_cov.block(s * m, s * m, m, m);
    if (keep.empty()) {
        return out;
    }
    const Eigen::MatrixXd syy = j.obs_cov(keep, keep);
    const Eigen::MatrixXd sby = j.cross(Eigen::seqN(s * m, m), keep);
    const Eigen::VectorXd resid = j.y(keep) - j.obs_mean(keep);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(syy);
    out.mean += sby * ldlt.solve(resid);
    out.cov -= sby * ldlt.solve(sby.transpose());
    return out;
}

inline double loglik(const Joint& j) {
    const Eigen::Index d = j.y.size();
    if (d == 0) {
        return 0.0;
    }
    const Eigen::LLT<Eigen::MatrixXd> llt(j.obs_cov);
    const Eigen::VectorXd resid = j.y - j.obs_mean;
    const Eigen::VectorXd w = llt.matrixL().solve(resid);
    double logdet = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
        logdet += 2.0 * std::log(llt.matrixL()(i, i));
    }
    return -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) + logdet + w.squaredNorm());
}

/// Random symmetric positive definite matrix.
inline Eigen::MatrixXd random_spd(Eigen::Index m, std::mt19937_64& rng, double ridge = 0.1) {
    std::normal_distribution<double> z(0.0, 1.0);
    Eigen::MatrixXd a(m, m);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        a.data()[i] = z(rng);
    }
    return a * a.transpose() / static_cast<double>(m) + ridge * Eigen::MatrixXd::Identity(m, m);
}

inline double max_abs(const Eigen::MatrixXd& a) {
    return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

} // namespace oracle
