#include "bsp/simulate.hpp"

#include "bsp/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bsp {

namespace {

// Transition and noise factors per distinct lag, without the positivity checks of assemble().
struct Propagator {
    std::vector<Eigen::MatrixXd> T;
    std::vector<Eigen::MatrixXd> noise_factor;
    std::vector<std::size_t> index;   // per lag
};

Propagator make_propagator(const StateSpaceModel& model) {
    Propagator out;
    std::vector<std::size_t> first_use;
    for (std::size_t s = 0; s < model.lags.size(); ++s) {
        std::size_t found = out.T.size();
        for (std::size_t d = 0; d < out.T.size(); ++d) {
            const std::size_t u = first_use[d];
            if (model.T[u] == model.T[s] && model.Q[u] == model.Q[s]) {
                found = d;
                break;
            }
        }
        if (found == out.T.size()) {
            out.T.push_back(model.T[s]);
            out.noise_factor.push_back(psd_sqrt(model.Q[s]));
            first_use.push_back(s);
        }
        out.index.push_back(found);
    }
    return out;
}

Eigen::VectorXd draw(const GaussianBelief& belief, const Eigen::MatrixXd& factor, std::mt19937_64& rng) {
    return belief.mean + factor * standard_normal_vector(belief.mean.size(), rng);
}

} // namespace

SimMode parse_sim_mode(const std::string& name) {
    if (name == "gaussian") {
        return SimMode::Gaussian;
    }
    if (name == "poisson") {
        return SimMode::Poisson;
    }
    throw std::invalid_argument("unknown simulation mode '" + name + "' (expected gaussian or poisson)");
}

std::string to_string(SimMode mode) {
    return mode == SimMode::Gaussian ? "gaussian" : "poisson";
}

Eigen::VectorXd reference_log_rates(std::span<const double> ages) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(ages.size()));
    for (std::size_t i = 0; i < ages.size(); ++i) {
        const double x = ages[i];
        const double hump = (x - 22.0) / 6.0;
        const double m = 0.006 * std::exp(-1.5 * x) + 1e-4 + 3e-4 * std::exp(-hump * hump) +
                         3e-5 * std::exp(0.1 * x);
        out[static_cast<Eigen::Index>(i)] = std::log(m);
    }
    return out;
}

GaussianBelief reference_initial_belief(const BasisSet& basis, std::span<const double> ages, double variance,
                                        std::optional<double> level_variance) {
    const DesignMatrix design = design_matrix(basis, ages);
    const Eigen::VectorXd target = reference_log_rates(ages);
    const Eigen::VectorXd beta = design.values.colPivHouseholderQr().solve(target);
    GaussianBelief belief;
    belief.mean = Eigen::VectorXd::Zero(3 * basis.p);
    for (int j = 0; j < basis.p; ++j) {
        belief.mean[StateLayout::level(j)] = beta[j];
    }
    belief.cov = variance * Eigen::MatrixXd::Identity(3 * basis.p, 3 * basis.p);
    if (level_variance) {
        for (int j = 0; j < basis.p; ++j) {
            belief.cov(StateLayout::level(j), StateLayout::level(j)) = *level_variance;
        }
    }
    return belief;
}

std::vector<Eigen::VectorXd> simulate_states(const StateSpaceModel& model, std::mt19937_64& rng) {
    const Propagator prop = make_propagator(model);
    std::vector<Eigen::VectorXd> states;
    states.reserve(model.time_points());
    states.push_back(draw(model.initial, psd_sqrt(model.initial.cov), rng));
    for (std::size_t s = 0; s < model.lags.size(); ++s) {
        const std::size_t d = prop.index[s];
        const Eigen::VectorXd noise = prop.noise_factor[d] * standard_normal_vector(model.state_dim(), rng);
        states.push_back(prop.T[d] * states.back() + noise);
    }
    return states;
}

std::vector<Eigen::VectorXd> simulation_smoother_draw(const StateSpaceModel& model,
                                                      const FilterResult& filtered,
                                                      const std::vector<Eigen::VectorXd>& smoothed,
                                                      const ObservationSeries& obs, std::mt19937_64& rng) {
    const std::vector<Eigen::VectorXd> states = simulate_states(model, rng);
    ObservationSeries synthetic;
    synthetic.values.resize(obs.rows(), obs.steps());
    synthetic.observed = obs.observed;
    const Eigen::VectorXd sd = model.H.cwiseSqrt();
    for (Eigen::Index s = 0; s < obs.steps(); ++s) {
        const Eigen::VectorXd eps = standard_normal_vector(obs.rows(), rng);
        synthetic.values.col(s) = model.Z * states[static_cast<std::size_t>(s)] + sd.cwiseProduct(eps);
    }
    const std::vector<Eigen::VectorXd> synthetic_smoothed = smoothed_means(model, filtered, synthetic);
    std::vector<Eigen::VectorXd> out(states.size());
    for (std::size_t s = 0; s < states.size(); ++s) {
        out[s] = smoothed[s] + states[s] - synthetic_smoothed[s];
    }
    return out;
}

SimResult simulate_surface(const SimConfig& config) {
    const int p = config.basis.p;
    if (config.n_years < 1) {
        throw std::invalid_argument("n_years must be at least 1");
    }
    if (config.initial.mean.size() != 3 * p || config.initial.cov.rows() != 3 * p) {
        throw std::invalid_argument("initial belief must have dimension 3p");
    }
    const HyperParams& hp = config.hp;
    if (!(hp.sigma2_obs >= 0.0) || !(hp.sigma2_beta >= 0.0) || !(hp.sigma2_a >= 0.0) || !(hp.lambda > 0.0)) {
        throw std::invalid_argument("simulation variances must be nonnegative and lambda positive");
    }

    std::vector<int> ages = config.ages;
    if (ages.empty()) {
        for (int a = 0; a <= 100; ++a) {
            ages.push_back(a);
        }
    }
    std::vector<double> age_values(ages.begin(), ages.end());
    const auto k = static_cast<Eigen::Index>(ages.size());
    const auto n = static_cast<Eigen::Index>(config.n_years);

    const bool poisson = config.mode == SimMode::Poisson;
    if (poisson) {
        if (config.exposure_grid.size() > 0) {
            if (config.exposure_grid.rows() != k || config.exposure_grid.cols() != n) {
                throw std::invalid_argument("exposure grid must be ages x years");
            }
            if ((config.exposure_grid.array() <= 0.0).any()) {
                throw std::invalid_argument("exposures must be positive in poisson mode");
            }
        } else if (!(config.exposure > 0.0)) {
            throw std::invalid_argument("exposure must be positive in poisson mode");
        }
    }

    StateSpaceModel model;
    model.Z = observation_matrix(design_matrix(config.basis, age_values));
    model.H = Eigen::VectorXd::Constant(k, hp.sigma2_obs);
    model.initial = config.initial;
    model.lags.assign(static_cast<std::size_t>(n - 1), 1.0);
    model.block_size = 3;
    const Eigen::MatrixXd t = transition_matrix(p, hp.lambda, 1.0);
    const Eigen::MatrixXd q = process_noise(config.correlations, hp, 1.0);
    model.T.assign(model.lags.size(), t);
    model.Q.assign(model.lags.size(), q);

    std::mt19937_64 rng(config.seed);
    SimResult out;
    out.states = simulate_states(model, rng);
    out.f.resize(k, n);
    out.log_mean_rates.resize(k, n);
    const double sd = std::sqrt(hp.sigma2_obs);
    for (Eigen::Index s = 0; s < n; ++s) {
        out.f.col(s) = model.Z * out.states[static_cast<std::size_t>(s)];
        out.log_mean_rates.col(s) = out.f.col(s) + sd * standard_normal_vector(k, rng);
    }

    MortalitySurface& surface = out.surface;
    surface.ages = ages;
    for (int y = 0; y < config.n_years; ++y) {
        surface.years.push_back(config.first_year + y);
    }
    surface.gender = config.gender;
    surface.country_code = config.country_code;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    surface.deaths = Eigen::MatrixXd::Constant(k, n, nan);
    surface.exposures = Eigen::MatrixXd::Constant(k, n, nan);
    surface.observed = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(k, n, true);
    if (!poisson) {
        surface.log_rates = out.log_mean_rates;
        return out;
    }

    surface.log_rates = Eigen::MatrixXd::Constant(k, n, nan);
    for (Eigen::Index s = 0; s < n; ++s) {
        for (Eigen::Index i = 0; i < k; ++i) {
            const double e = config.exposure_grid.size() > 0 ? config.exposure_grid(i, s) : config.exposure;
            std::poisson_distribution<long long> pois(e * std::exp(out.log_mean_rates(i, s)));
            const auto d = static_cast<double>(pois(rng));
            surface.deaths(i, s) = d;
            surface.exposures(i, s) = e;
            if (d > 0.0) {
                surface.log_rates(i, s) = std::log(d / e);
            } else {
                surface.observed(i, s) = false;
            }
        }
    }
    return out;
}

std::vector<Prop1Row> check_prop1(std::span<const double> exposures, int n_draws, double f, double sigma,
                                  std::uint64_t seed) {
    if (n_draws < 1) {
        throw std::invalid_argument("n_draws must be at least 1");
    }
    if (!(sigma > 0.0)) {
        throw std::invalid_argument("sigma must be positive");
    }
    for (std::size_t i = 0; i < exposures.size(); ++i) {
        if (!(exposures[i] > 0.0) || (i > 0 && !(exposures[i] > exposures[i - 1]))) {
            throw std::invalid_argument("exposures must be positive and increasing");
        }
    }
    std::vector<Prop1Row> rows;
    for (std::size_t level = 0; level < exposures.size(); ++level) {
        const double e = exposures[level];
        std::mt19937_64 rng(seed + level);
        std::normal_distribution<double> normal(0.0, 1.0);
        std::vector<double> samples(static_cast<std::size_t>(n_draws));
        for (auto& x : samples) {
            const double mean = e * std::exp(f + sigma * normal(rng));
            std::poisson_distribution<long long> pois(mean);
            const auto d = static_cast<double>(pois(rng));
            x = d > 0.0 ? std::log(d / e) : -std::numeric_limits<double>::infinity();
        }
        rows.push_back({e, ks_distance_normal(std::move(samples), f, sigma)});
    }
    return rows;
}

} // namespace bsp
