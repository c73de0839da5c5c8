#include "bsp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bsp {

double quantile(std::vector<double> values, double prob) {
    if (values.empty()) {
        throw std::domain_error("quantile of an empty sample");
    }
    if (!(prob >= 0.0 && prob <= 1.0)) {
        throw std::domain_error("quantile probability must lie in [0, 1]");
    }
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * prob;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values) {
    return quantile(std::move(values), 0.5);
}

double sample_variance(std::span<const double> values) {
    if (values.size() < 2) {
        return 0.0;
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return ss / static_cast<double>(values.size() - 1);
}

double normal_cdf(double x, double mean, double sd) {
    if (x == -std::numeric_limits<double>::infinity()) {
        return 0.0;
    }
    return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

double ks_distance_normal(std::vector<double> samples, double mean, double sd) {
    if (samples.empty()) {
        throw std::domain_error("KS distance of an empty sample");
    }
    std::sort(samples.begin(), samples.end());
    const auto n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double cdf = normal_cdf(samples[i], mean, sd);
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - cdf));
        d = std::max(d, std::abs(cdf - static_cast<double>(i) / n));
    }
    return d;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal();
}

Eigen::VectorXd standard_normal_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        z[i] = normal(rng);
    }
    return z;
}

double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

} // namespace bsp
