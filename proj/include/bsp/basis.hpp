#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace bsp {

/**
 * Clamped B-spline basis g_1..g_p over a closed age interval.
 *
 * `knots` is the full knot vector with both boundary knots repeated
 * degree+1 times, so p = knots.size() - degree - 1. `peak_ages[j]` is the
 * age at which g_j attains its maximum (0.01-year grid search).
 */
struct BasisSet {
    int degree = 3;
    std::vector<double> knots;
    int p = 0;
    std::vector<double> peak_ages;
    std::vector<double> age_grid;

    double lower() const { return knots.front(); }
    double upper() const { return knots.back(); }
    bool contains(double x) const { return x >= lower() && x <= upper(); }

    /// Values of all p basis functions at x. Throws std::domain_error outside the span.
    Eigen::VectorXd evaluate(double x) const;
};

/// Design matrix with entry (i, j) = g_j(ages[i]).
struct DesignMatrix {
    std::vector<double> ages;
    Eigen::MatrixXd values;
};

/// Interior knots of the default 20-function basis on [0, 100]; denser at both ends.
std::vector<double> default_interior_knots();

/// Clamped basis from breakpoints (boundaries included, nondecreasing).
BasisSet build_basis(std::span<const double> breakpoints, int degree);

/// Default cubic basis on [age_min, age_max]: the [0, 100] interior knots rescaled linearly.
BasisSet build_default_basis(double age_min = 0.0, double age_max = 100.0);

DesignMatrix design_matrix(const BasisSet& basis, std::span<const double> ages);

/// Evaluates sum_j coeffs[j] g_j(x) with de Boor's algorithm (independent of `evaluate`).
double evaluate_spline(const BasisSet& basis, std::span<const double> coeffs, double x);

/// Integer ages lo..hi as doubles.
std::vector<double> integer_ages(int lo, int hi);

} // namespace bsp
