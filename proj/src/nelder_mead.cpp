#include "bsp/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace bsp::optim {

namespace {

using Point = std::vector<double>;

double safe_eval(const Objective& objective, const Point& x, int& evaluations) {
    ++evaluations;
    const double value = objective(x);
    return std::isnan(value) ? std::numeric_limits<double>::infinity() : value;
}

Point affine(const Point& base, const Point& toward, double t) {
    Point out(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        out[i] = base[i] + t * (toward[i] - base[i]);
    }
    return out;
}

} // namespace

NelderMeadResult nelder_mead(const Objective& objective, std::vector<double> x0,
                             const NelderMeadOptions& options) {
    const std::size_t n = x0.size();
    if (n == 0) {
        throw std::invalid_argument("Nelder-Mead needs at least one parameter");
    }
    NelderMeadResult result;
    std::vector<Point> simplex(n + 1, x0);
    for (std::size_t i = 0; i < n; ++i) {
        simplex[i + 1][i] += options.initial_step;
    }
    std::vector<double> values(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        values[i] = safe_eval(objective, simplex[i], result.evaluations);
    }
    // Steer the start away from rejected regions by flipping rejected axis steps once.
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isinf(values[i + 1])) {
            simplex[i + 1][i] = x0[i] - options.initial_step;
            values[i + 1] = safe_eval(objective, simplex[i + 1], result.evaluations);
        }
    }

    std::vector<std::size_t> order(n + 1);
    for (int iter = 0; iter < options.max_iters; ++iter) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
        {
            std::vector<Point> s(n + 1);
            std::vector<double> v(n + 1);
            for (std::size_t i = 0; i <= n; ++i) {
                s[i] = std::move(simplex[order[i]]);
                v[i] = values[order[i]];
            }
            simplex = std::move(s);
            values = std::move(v);
        }
        result.iterations = iter;

        double spread = 0.0;
        for (std::size_t i = 1; i <= n; ++i) {
            for (std::size_t d = 0; d < n; ++d) {
                spread = std::max(spread, std::abs(simplex[i][d] - simplex[0][d]));
            }
        }
        const double f_spread = values[n] - values[0];
        if (std::isfinite(values[n]) && f_spread <= options.f_tol * (1.0 + std::abs(values[0])) &&
            spread <= options.x_tol) {
            result.converged = true;
            break;
        }

        Point centroid(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t d = 0; d < n; ++d) {
                centroid[d] += simplex[i][d] / static_cast<double>(n);
            }
        }
        const Point reflected = affine(centroid, simplex[n], -1.0);
        const double f_reflected = safe_eval(objective, reflected, result.evaluations);
        if (f_reflected < values[0]) {
            const Point expanded = affine(centroid, simplex[n], -2.0);
            const double f_expanded = safe_eval(objective, expanded, result.evaluations);
            if (f_expanded < f_reflected) {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
            continue;
        }
        if (f_reflected < values[n - 1]) {
            simplex[n] = reflected;
            values[n] = f_reflected;
            continue;
        }
        const bool outside = f_reflected < values[n];
        const Point contracted = outside ? affine(centroid, reflected, 0.5) : affine(centroid, simplex[n], 0.5);
        const double f_contracted = safe_eval(objective, contracted, result.evaluations);
        if (f_contracted < (outside ? f_reflected : values[n])) {
            simplex[n] = contracted;
            values[n] = f_contracted;
            continue;
        }
        for (std::size_t i = 1; i <= n; ++i) {
            simplex[i] = affine(simplex[0], simplex[i], 0.5);
            values[i] = safe_eval(objective, simplex[i], result.evaluations);
        }
    }
    if (!result.converged) {
        result.iterations = options.max_iters;
    }
    const auto best = static_cast<std::size_t>(
        std::min_element(values.begin(), values.end()) - values.begin());
    result.x = simplex[best];
    result.value = values[best];
    return result;
}

std::vector<std::vector<double>> latin_hypercube(std::size_t n, std::span<const Interval> box,
                                                 std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::vector<double>> points(n, std::vector<double>(box.size()));
    std::vector<std::size_t> strata(n);
    for (std::size_t d = 0; d < box.size(); ++d) {
        std::iota(strata.begin(), strata.end(), 0);
        std::shuffle(strata.begin(), strata.end(), rng);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = (static_cast<double>(strata[i]) + unit(rng)) / static_cast<double>(n);
            points[i][d] = box[d].lo + u * (box[d].hi - box[d].lo);
        }
    }
    return points;
}

} // namespace bsp::optim
