#pragma once

#include <Eigen/Dense>

#include <random>
#include <span>
#include <vector>

namespace bsp {

/// Sample quantile with linear interpolation between order statistics (Hyndman-Fan type 7).
double quantile(std::vector<double> values, double prob);
double median(std::vector<double> values);

/// Unbiased sample variance.
double sample_variance(std::span<const double> values);

double normal_cdf(double x, double mean, double sd);

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and N(mean, sd^2).
/// Samples equal to -infinity are allowed (they sit below every finite value).
double ks_distance_normal(std::vector<double> samples, double mean, double sd);

/// Square root factor S with S S' = cov for a symmetric PSD matrix (negative eigenvalues clipped).
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov);

Eigen::VectorXd standard_normal_vector(Eigen::Index n, std::mt19937_64& rng);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const Eigen::MatrixXd& m);

} // namespace bsp
