#include "doctest.h"

#include "bsp/basis.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace bsp;

namespace {

// Textbook recursion with the 0/0 = 0 convention; the right end of the span is assigned to
// the last non-degenerate interval.
double cox_de_boor(const std::vector<double>& t, int j, int d, double x) {
    if (d == 0) {
        const double last = t.back();
        if (x == last) {
            return (t[j] < last && t[j + 1] == last) ? 1.0 : 0.0;
        }
        return (t[j] <= x && x < t[j + 1]) ? 1.0 : 0.0;
    }
    double out = 0.0;
    const double left = t[j + d] - t[j];
    if (left > 0.0) {
        out += (x - t[j]) / left * cox_de_boor(t, j, d - 1, x);
    }
    const double right = t[j + d + 1] - t[j + 1];
    if (right > 0.0) {
        out += (t[j + d + 1] - x) / right * cox_de_boor(t, j + 1, d - 1, x);
    }
    return out;
}

} // namespace

TEST_CASE("default basis has 20 functions and only g1 is active at age 0") {
    const BasisSet b = build_default_basis(0.0, 100.0);
    CHECK(b.p == 20);
    CHECK(b.degree == 3);
    CHECK(default_interior_knots().size() == 16);
    const Eigen::VectorXd g0 = b.evaluate(0.0);
    CHECK(g0[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(g0.tail(19).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd g100 = b.evaluate(100.0);
    CHECK(g100[19] == doctest::Approx(1.0));
    CHECK(g100.head(19).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("peak ages match a direct grid search") {
    const BasisSet b = build_default_basis(0.0, 100.0);
    REQUIRE(b.peak_ages.size() == 20);
    std::vector<double> best_x(20, 0.0), best_v(20, -1.0);
    for (int i = 0; i <= 10000; ++i) {
        const double x = i * 0.01;
        for (int j = 0; j < 20; ++j) {
            const double v = cox_de_boor(b.knots, j, 3, x);
            if (v > best_v[j]) {
                best_v[j] = v;
                best_x[j] = x;
            }
        }
    }
    CHECK(b.peak_ages[0] == 0.0);
    for (int j = 0; j < 20; ++j) {
        CHECK(b.peak_ages[j] == doctest::Approx(best_x[j]).epsilon(1e-9));
        if (j > 0) {
            CHECK(b.peak_ages[j] > b.peak_ages[j - 1]);
        }
    }
}

TEST_CASE("linear hat functions") {
    const std::vector<double> k2{0.0, 1.0};
    const BasisSet b = build_basis(k2, 1);
    CHECK(b.p == 2);
    for (double x : {0.0, 0.25, 0.6, 1.0}) {
        const Eigen::VectorXd g = b.evaluate(x);
        CHECK(g[0] == doctest::Approx(1.0 - x));
        CHECK(g[1] == doctest::Approx(x));
    }

    const std::vector<double> k3{0.0, 0.5, 1.0};
    const BasisSet c = build_basis(k3, 1);
    CHECK(c.p == 3);
    const std::vector<double> grid{0.0, 0.5, 1.0};
    const DesignMatrix d = design_matrix(c, grid);
    CHECK((d.values - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("design matrix over integer ages") {
    const BasisSet b = build_default_basis();
    const DesignMatrix d = design_matrix(b, integer_ages(0, 100));
    REQUIRE(d.values.rows() == 101);
    REQUIRE(d.values.cols() == 20);
    CHECK(d.values(0, 0) == 1.0);
    CHECK(d.values(100, 19) == 1.0);
    for (Eigen::Index i = 0; i < d.values.rows(); ++i) {
        CHECK(std::abs(d.values.row(i).sum() - 1.0) < 1e-12);
        int nonzero = 0;
        for (Eigen::Index j = 0; j < 20; ++j) {
            CHECK(d.values(i, j) >= 0.0);
            CHECK(d.values(i, j) <= 1.0);
            nonzero += d.values(i, j) != 0.0 ? 1 : 0;
        }
        CHECK(nonzero <= 4);
    }
    // contiguous support per column
    for (Eigen::Index j = 0; j < 20; ++j) {
        int runs = 0;
        bool inside = false;
        for (Eigen::Index i = 0; i < 101; ++i) {
            const bool nz = d.values(i, j) != 0.0;
            runs += (nz && !inside) ? 1 : 0;
            inside = nz;
        }
        CHECK(runs == 1);
    }
}

TEST_CASE("partition of unity, local support and agreement of the evaluators") {
    const BasisSet b = build_default_basis();
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> age(0.0, 100.0);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double x = age(rng);
        const Eigen::VectorXd g = b.evaluate(x);
        CHECK(std::abs(g.sum() - 1.0) < 1e-10);
        for (int j = 0; j < b.p; ++j) {
            if (x < b.knots[j] || x > b.knots[j + b.degree + 1]) {
                CHECK(g[j] == 0.0);
            }
            CHECK(std::abs(g[j] - cox_de_boor(b.knots, j, 3, x)) < 1e-12);
        }
        std::vector<double> coeffs(b.p);
        for (auto& c : coeffs) {
            c = z(rng);
        }
        const double direct = g.dot(Eigen::Map<const Eigen::VectorXd>(coeffs.data(), b.p));
        CHECK(std::abs(evaluate_spline(b, coeffs, x) - direct) < 1e-12);
    }
}

TEST_CASE("rescaled default basis and invalid input") {
    const BasisSet b = build_default_basis(20.0, 90.0);
    CHECK(b.p == 20);
    CHECK(b.lower() == 20.0);
    CHECK(b.upper() == 90.0);
    CHECK_THROWS_AS(build_default_basis(5.0, 5.0), std::domain_error);
    const std::vector<double> unsorted{0.0, 2.0, 1.0};
    CHECK_THROWS_AS(build_basis(unsorted, 3), std::domain_error);
    const std::vector<double> ok{0.0, 1.0};
    CHECK_THROWS_AS(build_basis(ok, 0), std::domain_error);
    const std::vector<double> outside{-1.0};
    CHECK_THROWS_AS(design_matrix(b, outside), std::domain_error);
}
