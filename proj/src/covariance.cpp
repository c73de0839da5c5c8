#include "bsp/covariance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsp {

void KernelConfig::validate() const {
    if (!(smoothness > 0.0) || !std::isfinite(smoothness)) {
        throw std::domain_error("kernel smoothness must be positive");
    }
    if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
        throw std::domain_error("kernel length scale must be positive");
    }
}

double matern(double d, double smoothness, double length_scale) {
    if (!(d >= 0.0)) {
        throw std::domain_error("kernel distance must be nonnegative");
    }
    if (d == 0.0) {
        return 1.0;
    }
    if (smoothness == 0.5) {
        return std::exp(-d / length_scale);
    }
    if (smoothness == 1.5) {
        const double s = std::sqrt(3.0) * d / length_scale;
        return (1.0 + s) * std::exp(-s);
    }
    if (smoothness == 2.5) {
        const double s = std::sqrt(5.0) * d / length_scale;
        return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
    const double s = std::sqrt(2.0 * smoothness) * d / length_scale;
    // K_nu underflows far out; the correlation is zero to double precision there.
    if (s > 700.0) {
        return 0.0;
    }
    const double log_scale = (1.0 - smoothness) * std::log(2.0) - std::lgamma(smoothness);
    const double value = std::exp(log_scale + smoothness * std::log(s)) *
                         std::cyl_bessel_k(smoothness, s);
    return std::min(1.0, std::max(0.0, value));
}

double kernel_correlation(double d, const KernelConfig& config) {
    config.validate();
    if (!(d >= 0.0)) {
        throw std::domain_error("kernel distance must be nonnegative");
    }
    switch (config.family) {
    case KernelFamily::Matern:
        return matern(d, config.smoothness, config.length_scale);
    case KernelFamily::SquaredExponential: {
        const double z = d / config.length_scale;
        return std::exp(-0.5 * z * z);
    }
    }
    throw std::domain_error("unknown kernel family");
}

Eigen::MatrixXd correlation_matrix(std::span<const double> points, const KernelConfig& config) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::MatrixXd rho(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        rho(j, j) = 1.0;
        for (Eigen::Index l = j + 1; l < n; ++l) {
            const double value = kernel_correlation(std::abs(points[j] - points[l]), config);
            rho(j, l) = value;
            rho(l, j) = value;
        }
    }
    return rho;
}

CorrelationPair build_correlations(const BasisSet& basis, const KernelConfig& config_beta,
                                   const std::optional<KernelConfig>& config_a) {
    CorrelationPair pair;
    pair.rho_beta = correlation_matrix(basis.peak_ages, config_beta);
    pair.rho_a = config_a ? correlation_matrix(basis.peak_ages, *config_a)
                          : Eigen::MatrixXd::Identity(basis.p, basis.p);
    return pair;
}

KernelFamily parse_kernel_family(const std::string& name) {
    if (name == "matern") {
        return KernelFamily::Matern;
    }
    if (name == "squared_exponential" || name == "se") {
        return KernelFamily::SquaredExponential;
    }
    throw std::domain_error("unknown kernel family '" + name + "'");
}

std::string to_string(KernelFamily family) {
    return family == KernelFamily::Matern ? "matern" : "squared_exponential";
}

} // namespace bsp
