#include "run_config.hpp"

#include "bsp/errors.hpp"

#include <algorithm>
#include <initializer_list>
#include <stdexcept>

namespace bsp::cli {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!j.is_object()) {
        throw InputError(where + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw InputError("unknown key '" + key + "' in " + where);
        }
    }
}

template <typename T>
void read(const json& j, const char* key, T& target) {
    if (j.contains(key) && !j.at(key).is_null()) {
        target = j.at(key).get<T>();
    }
}

std::string gender_code(Gender g) {
    return g == Gender::Female ? "f" : "m";
}

json fit_config_json(const FitConfig& f) {
    json bounds = json::array();
    for (const auto& b : f.log_bounds) {
        bounds.push_back({b.lo, b.hi});
    }
    return {{"n_starts", f.n_starts}, {"max_iters", f.max_iters},     {"penalty_strength", f.penalty_strength},
            {"penalty_sd", f.penalty_sd}, {"log_bounds", bounds}, {"f_tol", f.f_tol},
            {"x_tol", f.x_tol},          {"initial_step", f.initial_step}};
}

void read_fit_config(const json& j, FitConfig& f, const std::string& where) {
    check_keys(j, {"n_starts", "max_iters", "penalty_strength", "penalty_sd", "log_bounds", "f_tol", "x_tol",
                   "initial_step"},
               where);
    read(j, "n_starts", f.n_starts);
    read(j, "max_iters", f.max_iters);
    read(j, "penalty_strength", f.penalty_strength);
    read(j, "penalty_sd", f.penalty_sd);
    read(j, "f_tol", f.f_tol);
    read(j, "x_tol", f.x_tol);
    read(j, "initial_step", f.initial_step);
    if (j.contains("log_bounds")) {
        f.log_bounds.clear();
        for (const auto& b : j.at("log_bounds")) {
            if (!b.is_array() || b.size() != 2) {
                throw InputError(where + ".log_bounds entries must be [lo, hi] pairs");
            }
            f.log_bounds.push_back({b[0].get<double>(), b[1].get<double>()});
        }
    }
}

json kernel_json(const KernelConfig& k) {
    return {{"family", to_string(k.family)}, {"smoothness", k.smoothness}, {"length_scale", k.length_scale}};
}

KernelConfig read_kernel(const json& j, const std::string& where) {
    check_keys(j, {"family", "smoothness", "length_scale"}, where);
    KernelConfig k;
    if (j.contains("family")) {
        k.family = parse_kernel_family(j.at("family").get<std::string>());
    }
    read(j, "smoothness", k.smoothness);
    read(j, "length_scale", k.length_scale);
    return k;
}

ForecastStart parse_start(const std::string& text) {
    if (text == "filtered") {
        return ForecastStart::Filtered;
    }
    if (text == "point_mass") {
        return ForecastStart::PointMass;
    }
    throw InputError("forecast start must be 'filtered' or 'point_mass', got '" + text + "'");
}

std::string start_name(ForecastStart s) {
    return s == ForecastStart::Filtered ? "filtered" : "point_mass";
}

std::string origins_text(const std::vector<int>& origins) {
    return std::to_string(origins.front()) + ".." + std::to_string(origins.back());
}

} // namespace

json hyperparams_json(const HyperParams& hp) {
    return {{"sigma2_obs", hp.sigma2_obs}, {"sigma2_beta", hp.sigma2_beta}, {"sigma2_a", hp.sigma2_a},
            {"lambda", hp.lambda}};
}

HyperParams hyperparams_from_json(const json& j) {
    check_keys(j, {"sigma2_obs", "sigma2_beta", "sigma2_a", "lambda"}, "hyperparameters");
    HyperParams hp;
    for (const char* key : {"sigma2_obs", "sigma2_beta", "sigma2_a", "lambda"}) {
        if (!j.contains(key)) {
            throw InputError(std::string("hyperparameters lack '") + key + "'");
        }
    }
    hp.sigma2_obs = j.at("sigma2_obs").get<double>();
    hp.sigma2_beta = j.at("sigma2_beta").get<double>();
    hp.sigma2_a = j.at("sigma2_a").get<double>();
    hp.lambda = j.at("lambda").get<double>();
    return hp;
}

std::pair<int, int> parse_origins(const std::string& text) {
    const auto dots = text.find("..");
    if (dots == std::string::npos) {
        throw InputError("origins must look like A..B, got '" + text + "'");
    }
    try {
        std::size_t used_a = 0, used_b = 0;
        const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
        const int first = std::stoi(a, &used_a);
        const int last = std::stoi(b, &used_b);
        if (used_a != a.size() || used_b != b.size()) {
            throw std::invalid_argument("trailing text");
        }
        if (last < first) {
            throw InputError("origins range " + text + " is empty");
        }
        return {first, last};
    } catch (const InputError&) {
        throw;
    } catch (const std::exception&) {
        throw InputError("origins must look like A..B, got '" + text + "'");
    }
}

RunConfig parse_config(const json& doc) {
    RunConfig c;
    check_keys(doc, {"seed", "out", "data", "basis", "kernel", "fit", "params", "fit_result", "forecast", "smooth",
                     "simulate", "backtest", "prop1"},
               "config");
    read(doc, "seed", c.seed);
    read(doc, "out", c.out);

    if (doc.contains("data")) {
        const json& d = doc.at("data");
        check_keys(d, {"inputs", "country", "genders", "max_age", "years"}, "data");
        if (d.contains("inputs")) {
            for (const auto& in : d.at("inputs")) {
                check_keys(in, {"country", "surface_csv", "mx", "deaths", "exposures"}, "data.inputs");
                InputSpec s;
                read(in, "country", s.country);
                read(in, "surface_csv", s.surface_csv);
                read(in, "mx", s.mx);
                read(in, "deaths", s.deaths);
                read(in, "exposures", s.exposures);
                c.inputs.push_back(s);
            }
        }
        read(d, "country", c.country);
        if (d.contains("genders")) {
            c.genders.clear();
            for (const auto& g : d.at("genders")) {
                c.genders.push_back(parse_gender(g.get<std::string>()));
            }
        }
        read(d, "max_age", c.max_age);
        if (d.contains("years") && !d.at("years").is_null()) {
            const auto& y = d.at("years");
            if (!y.is_array() || y.size() != 2) {
                throw InputError("data.years must be [first, last]");
            }
            c.years = std::pair{y[0].get<int>(), y[1].get<int>()};
        }
    }

    if (doc.contains("basis")) {
        const json& b = doc.at("basis");
        check_keys(b, {"degree", "interior_knots"}, "basis");
        read(b, "degree", c.degree);
        read(b, "interior_knots", c.interior_knots);
    }
    if (doc.contains("kernel")) {
        const json& k = doc.at("kernel");
        check_keys(k, {"beta", "a"}, "kernel");
        if (k.contains("beta")) {
            c.kernel_beta = read_kernel(k.at("beta"), "kernel.beta");
        }
        if (k.contains("a") && !k.at("a").is_null()) {
            c.kernel_a = read_kernel(k.at("a"), "kernel.a");
        }
    }
    if (doc.contains("fit")) {
        read_fit_config(doc.at("fit"), c.fit, "fit");
    }
    if (doc.contains("params") && !doc.at("params").is_null()) {
        c.params = hyperparams_from_json(doc.at("params"));
    }
    read(doc, "fit_result", c.fit_result);

    if (doc.contains("forecast")) {
        const json& f = doc.at("forecast");
        check_keys(f, {"horizons", "mode", "window", "draws", "start", "variance_fit"}, "forecast");
        read(f, "horizons", c.horizons);
        read(f, "mode", c.forecast_mode);
        read(f, "window", c.drift.window);
        read(f, "draws", c.drift.n_draws);
        if (f.contains("start")) {
            c.drift.start = parse_start(f.at("start").get<std::string>());
        }
        if (f.contains("variance_fit")) {
            read_fit_config(f.at("variance_fit"), c.drift.variance_fit, "forecast.variance_fit");
        }
    }
    if (doc.contains("smooth")) {
        check_keys(doc.at("smooth"), {"splines"}, "smooth");
        read(doc.at("smooth"), "splines", c.smooth_splines);
    }
    if (doc.contains("simulate")) {
        const json& s = doc.at("simulate");
        check_keys(s, {"params", "n_years", "first_year", "exposure", "mode", "initial_variance", "level_variance",
                       "country"},
                   "simulate");
        if (s.contains("params")) {
            c.simulate.params = hyperparams_from_json(s.at("params"));
        }
        read(s, "n_years", c.simulate.n_years);
        read(s, "first_year", c.simulate.first_year);
        read(s, "exposure", c.simulate.exposure);
        if (s.contains("mode")) {
            c.simulate.mode = parse_sim_mode(s.at("mode").get<std::string>());
        }
        read(s, "initial_variance", c.simulate.initial_variance);
        read(s, "level_variance", c.simulate.level_variance);
        read(s, "country", c.simulate.country);
    }
    if (doc.contains("backtest")) {
        const json& b = doc.at("backtest");
        check_keys(b, {"origins", "horizons", "forecaster"}, "backtest");
        if (b.contains("origins")) {
            const auto [first, last] = parse_origins(b.at("origins").get<std::string>());
            c.backtest.origins.clear();
            for (int y = first; y <= last; ++y) {
                c.backtest.origins.push_back(y);
            }
        }
        read(b, "horizons", c.backtest.horizons);
        read(b, "forecaster", c.backtest_forecaster);
    }
    if (doc.contains("prop1")) {
        const json& p = doc.at("prop1");
        check_keys(p, {"exposures", "draws", "log_rate", "sigma"}, "prop1");
        read(p, "exposures", c.prop1.exposures);
        read(p, "draws", c.prop1.draws);
        read(p, "log_rate", c.prop1.log_rate);
        read(p, "sigma", c.prop1.sigma);
    }
    return c;
}

json to_json(const RunConfig& c) {
    json inputs = json::array();
    for (const auto& in : c.inputs) {
        inputs.push_back({{"country", in.country},
                          {"surface_csv", in.surface_csv},
                          {"mx", in.mx},
                          {"deaths", in.deaths},
                          {"exposures", in.exposures}});
    }
    json genders = json::array();
    for (Gender g : c.genders) {
        genders.push_back(gender_code(g));
    }
    json years = c.years ? json::array({c.years->first, c.years->second}) : json(nullptr);
    const BasisSet basis = make_basis(c);
    const std::vector<double> interior(basis.knots.begin() + basis.degree + 1, basis.knots.end() - basis.degree - 1);

    json out;
    out["seed"] = c.seed;
    out["out"] = c.out;
    out["data"] = {{"inputs", inputs},
                   {"country", c.country},
                   {"genders", genders},
                   {"max_age", c.max_age},
                   {"years", years}};
    out["basis"] = {{"degree", c.degree}, {"interior_knots", interior}};
    out["kernel"] = {{"beta", kernel_json(c.kernel_beta)},
                     {"a", c.kernel_a ? kernel_json(*c.kernel_a) : json(nullptr)}};
    out["fit"] = fit_config_json(c.fit);
    out["params"] = c.params ? hyperparams_json(*c.params) : json(nullptr);
    out["fit_result"] = c.fit_result;
    out["forecast"] = {{"horizons", c.horizons},
                       {"mode", c.forecast_mode},
                       {"window", c.drift.window},
                       {"draws", c.drift.n_draws},
                       {"start", start_name(c.drift.start)},
                       {"variance_fit", fit_config_json(c.drift.variance_fit)}};
    out["smooth"] = {{"splines", c.smooth_splines}};
    out["simulate"] = {{"params", hyperparams_json(c.simulate.params)},
                       {"n_years", c.simulate.n_years},
                       {"first_year", c.simulate.first_year},
                       {"exposure", c.simulate.exposure},
                       {"mode", to_string(c.simulate.mode)},
                       {"initial_variance", c.simulate.initial_variance},
                       {"level_variance", c.simulate.level_variance},
                       {"country", c.simulate.country}};
    out["backtest"] = {{"origins", origins_text(c.backtest.origins)},
                       {"horizons", c.backtest.horizons},
                       {"forecaster", c.backtest_forecaster}};
    out["prop1"] = {{"exposures", c.prop1.exposures},
                    {"draws", c.prop1.draws},
                    {"log_rate", c.prop1.log_rate},
                    {"sigma", c.prop1.sigma}};
    return out;
}

void RunConfig::validate() const {
    if (genders.empty()) {
        throw InputError("at least one gender is required");
    }
    if (max_age < 1) {
        throw InputError("max_age must be at least 1");
    }
    if (years && years->second < years->first) {
        throw InputError("data.years range is empty");
    }
    if (horizons < 1) {
        throw InputError("horizons must be at least 1");
    }
    if (forecast_mode != "drift" && forecast_mode != "predictive") {
        throw InputError("forecast mode must be 'drift' or 'predictive'");
    }
    if (backtest_forecaster != "bsp" && backtest_forecaster != "naive") {
        throw InputError("backtest forecaster must be 'bsp' or 'naive'");
    }
    if (params) {
        params->validate();
    }
    kernel_beta.validate();
    if (kernel_a) {
        kernel_a->validate();
    }
    fit.validate();
    drift.validate();
    backtest.validate();
    if (simulate.n_years < 1 || !(simulate.exposure > 0.0) || simulate.initial_variance < 0.0 ||
        simulate.level_variance < 0.0) {
        throw InputError("simulate settings out of range");
    }
    if (prop1.draws < 1 || !(prop1.sigma > 0.0)) {
        throw InputError("prop1 settings out of range");
    }
    for (const auto& in : inputs) {
        if (in.surface_csv.empty() && in.mx.empty() && (in.deaths.empty() || in.exposures.empty())) {
            throw InputError("input '" + in.country + "' needs surface_csv, mx, or deaths and exposures");
        }
    }
}

void RunConfig::propagate_seed() {
    fit.rng_seed = seed;
    drift.seed = seed + 1;
    drift.variance_fit.rng_seed = seed + 2;
}

BasisSet make_basis(const RunConfig& config) {
    if (config.interior_knots.empty() && config.degree == 3) {
        return build_default_basis(0.0, static_cast<double>(config.max_age));
    }
    std::vector<double> breakpoints{0.0};
    if (config.interior_knots.empty()) {
        const BasisSet d = build_default_basis(0.0, static_cast<double>(config.max_age));
        breakpoints.insert(breakpoints.end(), d.knots.begin() + d.degree + 1, d.knots.end() - d.degree - 1);
    } else {
        breakpoints.insert(breakpoints.end(), config.interior_knots.begin(), config.interior_knots.end());
    }
    breakpoints.push_back(static_cast<double>(config.max_age));
    return build_basis(breakpoints, config.degree);
}

CorrelationPair make_correlations(const RunConfig& config, const BasisSet& basis) {
    return build_correlations(basis, config.kernel_beta, config.kernel_a);
}

} // namespace bsp::cli
