#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace bsp::optim {

struct NelderMeadOptions {
    int max_iters = 500;
    double f_tol = 1e-8;        // spread of objective values across the simplex
    double x_tol = 1e-6;        // largest vertex distance from the best vertex
    double initial_step = 0.5;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
};

/// Objective to minimize. May return +infinity (or NaN) to reject a point.
using Objective = std::function<double(std::span<const double>)>;

/**
 * Downhill simplex minimization (reflection 1, expansion 2, contraction 1/2, shrink 1/2).
 * The initial simplex steps `initial_step` along each axis from x0.
 */
NelderMeadResult nelder_mead(const Objective& objective, std::vector<double> x0,
                             const NelderMeadOptions& options = {});

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
};

/// n Latin-hypercube points: one point per stratum in every coordinate.
std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::span<const Interval> box,
                                                 std::mt19937_64& rng);

} // namespace bsp::optim
