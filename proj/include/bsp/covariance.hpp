#pragma once

#include "bsp/basis.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>

namespace bsp {

enum class KernelFamily { Matern, SquaredExponential };

/// Stationary correlation kernel over peak-age distance (years of age).
struct KernelConfig {
    KernelFamily family = KernelFamily::Matern;
    double smoothness = 0.5;    // Matern nu; ignored by the squared exponential
    double length_scale = 1.0;

    void validate() const;
};

/// Cross-spline correlations for the slope noise (rho_beta) and the local-mean noise (rho_a).
struct CorrelationPair {
    Eigen::MatrixXd rho_beta;
    Eigen::MatrixXd rho_a;
};

/// Matern correlation at distance d >= 0 (closed forms for nu = 1/2, 3/2, 5/2).
double matern(double d, double smoothness, double length_scale);

/// Kernel correlation at distance d >= 0; equals 1 at d = 0 and never increases with d.
double kernel_correlation(double d, const KernelConfig& config);

Eigen::MatrixXd correlation_matrix(std::span<const double> points, const KernelConfig& config);

/// `config_a == std::nullopt` means no correlation across local means (rho_a = I).
CorrelationPair build_correlations(const BasisSet& basis, const KernelConfig& config_beta,
                                   const std::optional<KernelConfig>& config_a = std::nullopt);

KernelFamily parse_kernel_family(const std::string& name);
std::string to_string(KernelFamily family);

} // namespace bsp
