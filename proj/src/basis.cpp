#include "bsp/basis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bsp {

namespace {

// Index i of the knot span with knots[i] <= x < knots[i+1]; the right boundary maps to the
// last non-degenerate span.
int find_span(const BasisSet& basis, double x) {
    const int last = basis.p - 1;
    if (x >= basis.knots[last + 1]) {
        return last;
    }
    const auto it = std::upper_bound(basis.knots.begin() + basis.degree,
                                     basis.knots.begin() + last + 1, x);
    return static_cast<int>(it - basis.knots.begin()) - 1;
}

// Cox-de Boor triangle: the degree+1 functions nonzero on `span`, in order.
void nonzero_basis(const BasisSet& basis, int span, double x, std::vector<double>& out) {
    const int d = basis.degree;
    const auto& t = basis.knots;
    out.assign(d + 1, 0.0);
    std::vector<double> left(d + 1), right(d + 1);
    out[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
        left[j] = x - t[span + 1 - j];
        right[j] = t[span + j] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double denom = right[r + 1] + left[j - r];
            const double temp = denom == 0.0 ? 0.0 : out[r] / denom;
            out[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        out[j] = saved;
    }
}

void require_in_span(const BasisSet& basis, double x) {
    if (!std::isfinite(x) || !basis.contains(x)) {
        throw std::domain_error("age " + std::to_string(x) + " outside basis span [" +
                                std::to_string(basis.lower()) + ", " +
                                std::to_string(basis.upper()) + "]");
    }
}

std::vector<double> compute_peak_ages(const BasisSet& basis) {
    const double lo = basis.lower();
    const double hi = basis.upper();
    const auto steps = static_cast<long>(std::llround((hi - lo) / 0.01));
    std::vector<double> best(basis.p, -1.0);
    std::vector<double> peak(basis.p, lo);
    std::vector<double> local;
    for (long s = 0; s <= steps; ++s) {
        const double x = s == steps ? hi : lo + 0.01 * static_cast<double>(s);
        const int span = find_span(basis, x);
        nonzero_basis(basis, span, x, local);
        for (int r = 0; r <= basis.degree; ++r) {
            const int j = span - basis.degree + r;
            if (local[r] > best[j]) {
                best[j] = local[r];
                peak[j] = x;
            }
        }
    }
    return peak;
}

} // namespace

Eigen::VectorXd BasisSet::evaluate(double x) const {
    require_in_span(*this, x);
    Eigen::VectorXd values = Eigen::VectorXd::Zero(p);
    const int span = find_span(*this, x);
    std::vector<double> local;
    nonzero_basis(*this, span, x, local);
    for (int r = 0; r <= degree; ++r) {
        values[span - degree + r] = local[r];
    }
    return values;
}

std::vector<double> default_interior_knots() {
    return {1, 3, 7, 12, 18, 25, 33, 42, 52, 62, 70, 77, 83, 88, 92, 96};
}

std::vector<double> integer_ages(int lo, int hi) {
    std::vector<double> ages;
    for (int a = lo; a <= hi; ++a) {
        ages.push_back(static_cast<double>(a));
    }
    return ages;
}

BasisSet build_basis(std::span<const double> breakpoints, int degree) {
    if (degree < 1) {
        throw std::domain_error("B-spline degree must be at least 1");
    }
    if (breakpoints.size() < 2) {
        throw std::domain_error("at least two knots are required");
    }
    for (double k : breakpoints) {
        if (!std::isfinite(k)) {
            throw std::domain_error("knots must be finite");
        }
    }
    if (!std::is_sorted(breakpoints.begin(), breakpoints.end())) {
        throw std::domain_error("knots must be nondecreasing");
    }
    const double lo = breakpoints.front();
    const double hi = breakpoints.back();
    if (!(lo < hi)) {
        throw std::domain_error("knot span must have positive length");
    }
    for (std::size_t i = 1; i + 1 < breakpoints.size(); ++i) {
        if (breakpoints[i] <= lo || breakpoints[i] >= hi) {
            throw std::domain_error("interior knots must lie strictly inside the boundary knots");
        }
    }

    BasisSet basis;
    basis.degree = degree;
    basis.knots.assign(degree + 1, lo);
    basis.knots.insert(basis.knots.end(), breakpoints.begin() + 1, breakpoints.end() - 1);
    basis.knots.insert(basis.knots.end(), degree + 1, hi);
    basis.p = static_cast<int>(basis.knots.size()) - degree - 1;
    basis.peak_ages = compute_peak_ages(basis);
    basis.age_grid = integer_ages(static_cast<int>(std::ceil(lo)), static_cast<int>(std::floor(hi)));
    return basis;
}

BasisSet build_default_basis(double age_min, double age_max) {
    if (!(age_min < age_max) || !std::isfinite(age_min) || !std::isfinite(age_max)) {
        throw std::domain_error("default basis requires age_min < age_max");
    }
    const double scale = (age_max - age_min) / 100.0;
    std::vector<double> breakpoints{age_min};
    for (double k : default_interior_knots()) {
        breakpoints.push_back(age_min + scale * k);
    }
    breakpoints.push_back(age_max);
    return build_basis(breakpoints, 3);
}

DesignMatrix design_matrix(const BasisSet& basis, std::span<const double> ages) {
    DesignMatrix dm;
    dm.ages.assign(ages.begin(), ages.end());
    dm.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ages.size()), basis.p);
    for (std::size_t i = 0; i < ages.size(); ++i) {
        dm.values.row(static_cast<Eigen::Index>(i)) = basis.evaluate(ages[i]).transpose();
    }
    return dm;
}

double evaluate_spline(const BasisSet& basis, std::span<const double> coeffs, double x) {
    require_in_span(basis, x);
    if (static_cast<int>(coeffs.size()) != basis.p) {
        throw std::domain_error("coefficient count does not match basis size");
    }
    const int d = basis.degree;
    const auto& t = basis.knots;
    const int span = find_span(basis, x);
    std::vector<double> c(d + 1);
    for (int j = 0; j <= d; ++j) {
        c[j] = coeffs[span - d + j];
    }
    for (int r = 1; r <= d; ++r) {
        for (int j = d; j >= r; --j) {
            const int i = span - d + j;
            const double denom = t[i + d + 1 - r] - t[i];
            const double alpha = denom == 0.0 ? 0.0 : (x - t[i]) / denom;
            c[j] = (1.0 - alpha) * c[j - 1] + alpha * c[j];
        }
    }
    return c[d];
}

} // namespace bsp
