#include "bsp/estimation.hpp"

#include "bsp/errors.hpp"
#include "bsp/kalman.hpp"
#include "bsp/parallel.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

namespace bsp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool inside(std::span<const double> theta, const std::vector<optim::Interval>& box) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (!(theta[i] >= box[i].lo && theta[i] <= box[i].hi)) {
            return false;
        }
    }
    return true;
}

double safe_loglik(const LogLikelihood& loglik, std::span<const double> theta) {
    try {
        const double value = loglik(theta);
        return std::isfinite(value) ? value : -kInf;
    } catch (const std::exception&) {
        return -kInf;
    }
}

} // namespace

void FitConfig::validate() const {
    if (n_starts < 1) {
        throw std::invalid_argument("n_starts must be at least 1");
    }
    if (max_iters < 1) {
        throw std::invalid_argument("max_iters must be at least 1");
    }
    if (!(penalty_strength >= 0.0) || !std::isfinite(penalty_strength)) {
        throw std::invalid_argument("penalty_strength must be nonnegative and finite");
    }
    if (!(penalty_sd > 0.0) || !std::isfinite(penalty_sd)) {
        throw std::invalid_argument("penalty_sd must be positive and finite");
    }
    if (log_bounds.empty()) {
        throw std::invalid_argument("log_bounds must not be empty");
    }
    for (const auto& b : log_bounds) {
        if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || !(b.lo < b.hi)) {
            throw std::invalid_argument("log_bounds must be finite with lo < hi");
        }
    }
    if (!(f_tol > 0.0) || !(x_tol > 0.0) || !(initial_step > 0.0)) {
        throw std::invalid_argument("optimizer tolerances and step must be positive");
    }
}

double log_penalty(std::span<const double> theta, const FitConfig& config) {
    double sum = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double centre = 0.5 * (config.log_bounds[i].lo + config.log_bounds[i].hi);
        const double z = (theta[i] - centre) / config.penalty_sd;
        sum += 0.5 * z * z;
    }
    return config.penalty_strength * sum;
}

MultiStartResult maximize_multistart(const LogLikelihood& loglik, const FitConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.rng_seed);
    const auto starts = optim::latin_hypercube(static_cast<std::size_t>(config.n_starts),
                                               config.log_bounds, rng);

    const optim::Objective objective = [&](std::span<const double> theta) {
        if (!inside(theta, config.log_bounds)) {
            return kInf;
        }
        const double ll = safe_loglik(loglik, theta);
        if (!std::isfinite(ll)) {
            return kInf;
        }
        return -ll + log_penalty(theta, config);
    };

    optim::NelderMeadOptions options;
    options.max_iters = config.max_iters;
    options.f_tol = config.f_tol;
    options.x_tol = config.x_tol;
    options.initial_step = config.initial_step;

    std::vector<StartTrace> trace(starts.size());
    parallel_for(starts.size(), [&](std::size_t i) {
        StartTrace& t = trace[i];
        t.start = starts[i];
        try {
            const auto result = optim::nelder_mead(objective, starts[i], options);
            t.optimum = result.x;
            t.objective = result.value;
            t.iterations = result.iterations;
            t.evaluations = result.evaluations;
            t.converged = result.converged;
            t.loglik = safe_loglik(loglik, result.x);
            if (!std::isfinite(result.value) || !std::isfinite(t.loglik)) {
                t.failed = true;
                t.error = "no finite likelihood reached";
            }
        } catch (const std::exception& e) {
            t.failed = true;
            t.error = e.what();
        }
    });

    MultiStartResult out;
    bool found = false;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const StartTrace& t = trace[i];
        if (t.failed) {
            continue;
        }
        if (!found || t.loglik > out.best_loglik) {
            found = true;
            out.best = t.optimum;
            out.best_loglik = t.loglik;
            out.best_objective = t.objective;
            out.best_start = i;
        }
    }
    if (!found) {
        throw EstimationError("all " + std::to_string(trace.size()) +
                              " starts failed to produce a finite likelihood");
    }
    out.trace = std::move(trace);
    return out;
}

HyperParams from_log(std::span<const double> theta) {
    if (theta.size() != 4) {
        throw std::invalid_argument("expected 4 log-parameters");
    }
    HyperParams hp;
    hp.sigma2_obs = std::exp(theta[0]);
    hp.sigma2_beta = std::exp(theta[1]);
    hp.sigma2_a = std::exp(theta[2]);
    hp.lambda = std::exp(theta[3]);
    return hp;
}

std::vector<double> to_log(const HyperParams& hp) {
    return {std::log(hp.sigma2_obs), std::log(hp.sigma2_beta), std::log(hp.sigma2_a), std::log(hp.lambda)};
}

double surface_loglik(const PreparedData& data, const CorrelationPair& correlations, const HyperParams& hp) {
    return loglik(build_model(data, correlations, hp), data.obs);
}

FitResult fit(const PreparedData& data, const CorrelationPair& correlations, const FitConfig& config) {
    if (config.log_bounds.size() != 4) {
        throw std::invalid_argument("fit expects bounds for 4 log-parameters");
    }
    if (data.obs.steps() < 2) {
        throw InputError("fitting needs at least 2 time points");
    }
    const LogLikelihood ll = [&](std::span<const double> theta) {
        return surface_loglik(data, correlations, from_log(theta));
    };
    MultiStartResult ms = maximize_multistart(ll, config);
    FitResult out;
    out.best = from_log(ms.best);
    out.best_loglik = ms.best_loglik;
    out.best_objective = ms.best_objective;
    out.best_start = ms.best_start;
    out.trace = std::move(ms.trace);
    return out;
}

FitResult fit(const MortalitySurface& surface, const BasisSet& basis, const CorrelationPair& correlations,
              const FitConfig& config) {
    return fit(prepare(surface, basis), correlations, config);
}

} // namespace bsp
