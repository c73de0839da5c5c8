#include "commands.hpp"

#include "outputs.hpp"

#include "bsp/errors.hpp"
#include "bsp/kalman.hpp"
#include "bsp/pipeline.hpp"

#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace bsp::cli {

using nlohmann::json;

namespace {

MortalitySurface restrict_surface(const MortalitySurface& s, int max_age, std::optional<std::pair<int, int>> years) {
    std::vector<Eigen::Index> rows, cols;
    for (std::size_t i = 0; i < s.k(); ++i) {
        if (s.ages[i] <= max_age) {
            rows.push_back(static_cast<Eigen::Index>(i));
        }
    }
    for (std::size_t j = 0; j < s.n(); ++j) {
        if (!years || (s.years[j] >= years->first && s.years[j] <= years->second)) {
            cols.push_back(static_cast<Eigen::Index>(j));
        }
    }
    if (rows.empty() || cols.empty()) {
        throw InputError("surface " + surface_label(s) + " has no data in the requested age and year range");
    }
    MortalitySurface out;
    out.gender = s.gender;
    out.country_code = s.country_code;
    for (auto i : rows) {
        out.ages.push_back(s.ages[static_cast<std::size_t>(i)]);
    }
    for (auto j : cols) {
        out.years.push_back(s.years[static_cast<std::size_t>(j)]);
    }
    out.deaths = s.deaths(rows, cols);
    out.exposures = s.exposures(rows, cols);
    out.log_rates = s.log_rates(rows, cols);
    out.observed = s.observed(rows, cols);
    return out;
}

std::vector<MortalitySurface> load_surfaces(const RunConfig& config, OutputDir& out) {
    if (config.inputs.empty()) {
        throw InputError("no input data configured (data.inputs)");
    }
    std::vector<MortalitySurface> surfaces;
    bool matched = false;
    for (const auto& in : config.inputs) {
        if (!config.country.empty() && in.country != config.country) {
            continue;
        }
        matched = true;
        if (!in.surface_csv.empty()) {
            std::istringstream text(out.read_input(in.surface_csv));
            const MortalitySurface s = read_surface_csv(text, config.genders.front(), in.country);
            surfaces.push_back(restrict_surface(s, config.max_age, config.years));
            continue;
        }
        std::map<HmdKind, HmdTable> tables;
        const auto load = [&](const std::string& path, HmdKind kind) {
            if (!path.empty()) {
                tables[kind] = parse_hmd_table(out.read_input(path), kind);
            }
        };
        load(in.mx, HmdKind::Mx);
        load(in.deaths, HmdKind::Deaths);
        load(in.exposures, HmdKind::Exposures);
        SurfaceSource src;
        const auto pick = [&](HmdKind kind) { return tables.count(kind) ? &tables.at(kind) : nullptr; };
        src.mx = pick(HmdKind::Mx);
        src.deaths = pick(HmdKind::Deaths);
        src.exposures = pick(HmdKind::Exposures);
        if (!src.exposures) {
            src.deaths = nullptr;
        }
        for (Gender g : config.genders) {
            surfaces.push_back(build_surface(src, g, config.max_age, config.years, in.country));
        }
    }
    if (!matched) {
        throw InputError("no input for country '" + config.country + "'");
    }
    return surfaces;
}

void check_ages(const BasisSet& basis, const MortalitySurface& s) {
    for (int a : s.ages) {
        if (!basis.contains(a)) {
            throw InputError("age " + std::to_string(a) + " lies outside the basis range");
        }
    }
}

json trace_json(const std::vector<StartTrace>& trace) {
    json out = json::array();
    for (const auto& t : trace) {
        out.push_back({{"start", t.start},
                       {"optimum", t.optimum},
                       {"loglik", t.loglik},
                       {"objective", t.objective},
                       {"iterations", t.iterations},
                       {"evaluations", t.evaluations},
                       {"converged", t.converged},
                       {"failed", t.failed},
                       {"error", t.error}});
    }
    return out;
}

json fit_json(const std::string& label, const FitResult& r) {
    return {{"surface", label},
            {"parameters", hyperparams_json(r.best)},
            {"log_parameters", to_log(r.best)},
            {"best_loglik", r.best_loglik},
            {"best_objective", r.best_objective},
            {"best_start", r.best_start},
            {"trace", trace_json(r.trace)}};
}

void write_matrix(OutputDir& out, const std::string& name, const Eigen::MatrixXd& m) {
    out.write_csv(name, [&](std::ostream& os) {
        os << "row";
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            os << ",c" << c + 1;
        }
        os << "\n";
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            os << r + 1;
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                os << "," << format_double(m(r, c));
            }
            os << "\n";
        }
    });
}

void dump_matrices(OutputDir& out, const std::string& label, const StateSpaceModel& model) {
    const std::string dir = "matrices_" + label + "/";
    write_matrix(out, dir + "Z.csv", model.Z);
    write_matrix(out, dir + "H.csv", model.H);
    write_matrix(out, dir + "initial_mean.csv", model.initial.mean);
    write_matrix(out, dir + "initial_cov.csv", model.initial.cov);
    if (!model.T.empty()) {
        write_matrix(out, dir + "T_first.csv", model.T.front());
        write_matrix(out, dir + "Q_first.csv", model.Q.front());
    }
}

/// Hyperparameters for one surface: fixed, read from an earlier fit, or fitted now.
HyperParams resolve_params(const RunConfig& config, const PreparedData& data, const CorrelationPair& corr,
                           const std::string& label, OutputDir& out, const json* earlier_fit) {
    if (config.params) {
        return *config.params;
    }
    if (earlier_fit) {
        return hyperparams_from_json(earlier_fit->at("parameters"));
    }
    const FitResult r = fit(data, corr, config.fit);
    out.write_json("fit_" + label + ".json", fit_json(label, r));
    return r.best;
}

std::optional<json> load_earlier_fit(const RunConfig& config, OutputDir& out) {
    if (config.params || config.fit_result.empty()) {
        return std::nullopt;
    }
    json doc;
    try {
        doc = json::parse(out.read_input(config.fit_result));
    } catch (const json::exception& e) {
        throw InputError("cannot read fit result '" + config.fit_result + "': " + e.what());
    }
    if (!doc.contains("parameters")) {
        throw InputError("fit result '" + config.fit_result + "' has no parameters");
    }
    return doc;
}

void cmd_basis(const RunConfig& config, OutputDir& out) {
    const BasisSet basis = make_basis(config);
    const std::vector<double> ages = integer_ages(0, config.max_age);
    const DesignMatrix g = design_matrix(basis, ages);
    out.write_csv("basis.csv", [&](std::ostream& os) {
        os << "age";
        for (int j = 1; j <= basis.p; ++j) {
            os << ",g" << j;
        }
        os << "\n";
        for (std::size_t i = 0; i < ages.size(); ++i) {
            os << format_double(ages[i]);
            for (int j = 0; j < basis.p; ++j) {
                os << "," << format_double(g.values(static_cast<Eigen::Index>(i), j));
            }
            os << "\n";
        }
    });
    out.write_csv("peak_ages.csv", [&](std::ostream& os) {
        os << "spline,peak_age\n";
        for (int j = 0; j < basis.p; ++j) {
            os << j + 1 << "," << format_double(basis.peak_ages[static_cast<std::size_t>(j)]) << "\n";
        }
    });
}

void cmd_fit(const RunConfig& config, const RunOptions& options, OutputDir& out) {
    const BasisSet basis = make_basis(config);
    const CorrelationPair corr = make_correlations(config, basis);
    for (const auto& s : load_surfaces(config, out)) {
        check_ages(basis, s);
        const std::string label = surface_label(s);
        const PreparedData data = prepare(s, basis);
        const FitResult r = fit(data, corr, config.fit);
        out.write_json("fit_" + label + ".json", fit_json(label, r));
        if (options.dump_matrices) {
            dump_matrices(out, label, build_model(data, corr, r.best));
        }
    }
}

void cmd_smooth(const RunConfig& config, const RunOptions& options, OutputDir& out) {
    const BasisSet basis = make_basis(config);
    const CorrelationPair corr = make_correlations(config, basis);
    for (int j : config.smooth_splines) {
        if (j < 1 || j > basis.p) {
            throw InputError("smooth.splines entries must lie in 1.." + std::to_string(basis.p));
        }
    }
    const std::optional<json> earlier = load_earlier_fit(config, out);
    for (const auto& s : load_surfaces(config, out)) {
        check_ages(basis, s);
        const std::string label = surface_label(s);
        const PreparedData data = prepare(s, basis);
        const HyperParams hp = resolve_params(config, data, corr, label, out, earlier ? &*earlier : nullptr);
        const SmoothedSurface sm = run_smoother(data, corr, hp);
        out.write_csv("smooth_" + label + ".csv", [&](std::ostream& os) {
            os << "year,spline,quantity,mean,lo95,hi95\n";
            for (std::size_t t = 0; t < s.n(); ++t) {
                const GaussianBelief& b = sm.smoothed.smoothed[t];
                for (int j : config.smooth_splines) {
                    for (const auto& [name, idx] :
                         {std::pair{"level", StateLayout::level(j - 1)}, std::pair{"slope", StateLayout::slope(j - 1)}}) {
                        const double mean = b.mean[idx];
                        const double half = kNormalQuantile975 * std::sqrt(std::max(0.0, b.cov(idx, idx)));
                        os << s.years[t] << "," << j << "," << name << "," << format_double(mean) << ","
                           << format_double(mean - half) << "," << format_double(mean + half) << "\n";
                    }
                }
            }
        });
        if (options.dump_matrices) {
            dump_matrices(out, label, sm.model);
        }
    }
}

json drift_json(const DriftModel& d, const MortalitySurface& s) {
    return {{"sigma2_omega", d.sigma2_omega},
            {"sigma2_delta", d.sigma2_delta},
            {"sigma2_psi", d.sigma2_psi},
            {"lambda_hat", d.lambda_hat},
            {"beta_start", std::vector<double>(d.beta_start.begin(), d.beta_start.end())},
            {"drift_start", std::vector<double>(d.drift_start.begin(), d.drift_start.end())},
            {"variance_loglik", d.variance_loglik},
            {"window_first_year", s.years[d.window_first]},
            {"prior_first_year", s.years[d.prior_first]},
            {"variance_trace", trace_json(d.variance_trace)}};
}

void cmd_forecast(const RunConfig& config, const RunOptions& options, OutputDir& out) {
    const BasisSet basis = make_basis(config);
    const CorrelationPair corr = make_correlations(config, basis);
    const std::optional<json> earlier = load_earlier_fit(config, out);
    for (const auto& s : load_surfaces(config, out)) {
        check_ages(basis, s);
        const std::string label = surface_label(s);
        const PreparedData data = prepare(s, basis);
        const HyperParams hp = resolve_params(config, data, corr, label, out, earlier ? &*earlier : nullptr);
        const SmoothedSurface sm = run_smoother(data, corr, hp);
        ForecastResult result;
        if (config.forecast_mode == "predictive") {
            result = predictive_forecast(sm, corr, hp, config.horizons);
        } else {
            const DriftModel drift = build_drift_model(data, sm, corr, hp, config.drift);
            out.write_json("drift_" + label + ".json", drift_json(drift, s));
            result = forecast(drift, data.design, config.horizons);
        }
        const int last_year = s.years.back();
        out.write_csv("forecast_" + label + ".csv", [&](std::ostream& os) {
            os << "year,age,point,lo95,hi95\n";
            for (const auto& h : result.horizons) {
                for (std::size_t i = 0; i < s.k(); ++i) {
                    const auto r = static_cast<Eigen::Index>(i);
                    os << last_year + h.horizon << "," << s.ages[i] << "," << format_double(h.point[r]) << ","
                       << format_double(h.lower[r]) << "," << format_double(h.upper[r]) << "\n";
                }
            }
        });
        out.write_csv("forecast_coefficients_" + label + ".csv", [&](std::ostream& os) {
            os << "year,spline,mean\n";
            for (const auto& h : result.horizons) {
                for (Eigen::Index j = 0; j < h.coef_mean.size(); ++j) {
                    os << last_year + h.horizon << "," << j + 1 << "," << format_double(h.coef_mean[j]) << "\n";
                }
            }
        });
        if (options.dump_matrices) {
            dump_matrices(out, label, sm.model);
        }
    }
}

void cmd_simulate(const RunConfig& config, OutputDir& out) {
    SimConfig c;
    c.basis = make_basis(config);
    c.correlations = make_correlations(config, c.basis);
    c.hp = config.simulate.params;
    for (int a = 0; a <= config.max_age; ++a) {
        c.ages.push_back(a);
    }
    c.initial = reference_initial_belief(c.basis, integer_ages(0, config.max_age), config.simulate.initial_variance,
                                         config.simulate.level_variance);
    c.first_year = config.simulate.first_year;
    c.n_years = config.simulate.n_years;
    c.exposure = config.simulate.exposure;
    c.seed = config.seed;
    c.mode = config.simulate.mode;
    c.gender = config.genders.front();
    c.country_code = config.simulate.country;
    const SimResult r = simulate_surface(c);
    out.write_csv("surface.csv", [&](std::ostream& os) { write_surface_csv(os, r.surface); });
    out.write_csv("states.csv", [&](std::ostream& os) {
        os << "year,spline,level,slope,local_mean\n";
        for (std::size_t t = 0; t < r.states.size(); ++t) {
            for (int j = 0; j < c.basis.p; ++j) {
                const Eigen::VectorXd& b = r.states[t];
                os << r.surface.years[t] << "," << j + 1 << "," << format_double(b[StateLayout::level(j)]) << ","
                   << format_double(b[StateLayout::slope(j)]) << "," << format_double(b[StateLayout::local_mean(j)])
                   << "\n";
            }
        }
    });
}

void cmd_backtest(const RunConfig& config, OutputDir& out) {
    const std::vector<MortalitySurface> surfaces = load_surfaces(config, out);
    Forecaster forecaster;
    if (config.backtest_forecaster == "naive") {
        forecaster = naive_forecaster();
    } else {
        BspSettings settings;
        settings.basis = make_basis(config);
        settings.correlations = make_correlations(config, settings.basis);
        settings.fit = config.fit;
        settings.drift = config.drift;
        for (const auto& s : surfaces) {
            check_ages(settings.basis, s);
        }
        forecaster = bsp_forecaster(settings);
    }
    const BacktestReport report = run_backtest(surfaces, config.backtest, forecaster, config.seed);

    json horizons = json::array();
    for (const auto& h : report.horizons) {
        horizons.push_back({{"horizon", h.horizon},
                            {"cells", h.cells},
                            {"median_abs_error", h.median_abs_error},
                            {"q1", h.q1},
                            {"q3", h.q3},
                            {"coverage95", h.coverage95}});
    }
    json skips = json::array();
    for (const auto& s : report.skips) {
        skips.push_back({{"surface", report.surface_labels[s.surface]},
                         {"origin", s.origin},
                         {"horizon", s.horizon},
                         {"reason", s.reason}});
    }
    out.write_json("backtest.json", {{"forecaster", config.backtest_forecaster},
                                     {"surfaces", report.surface_labels},
                                     {"origins", config.backtest.origins},
                                     {"horizons", horizons},
                                     {"skips", skips}});
    out.write_csv("backtest.csv", [&](std::ostream& os) {
        os << "horizon,cells,median_abs_error,q1,q3,coverage95\n";
        for (const auto& h : report.horizons) {
            os << h.horizon << "," << h.cells << "," << format_double(h.median_abs_error) << ","
               << format_double(h.q1) << "," << format_double(h.q3) << "," << format_double(h.coverage95) << "\n";
        }
    });
}

void cmd_prop1(const RunConfig& config, OutputDir& out) {
    const auto rows =
        check_prop1(config.prop1.exposures, config.prop1.draws, config.prop1.log_rate, config.prop1.sigma, config.seed);
    out.write_csv("prop1.csv", [&](std::ostream& os) {
        os << "exposure,ks_distance\n";
        for (const auto& r : rows) {
            os << format_double(r.exposure) << "," << format_double(r.ks_distance) << "\n";
        }
    });
}

} // namespace

void run_command(const std::string& name, const RunConfig& config, const RunOptions& options) {
    OutputDir out(config.out, config.seed);
    if (!options.config_path.empty()) {
        out.record_input(options.config_path, options.config_bytes);
    }
    if (name == "basis") {
        cmd_basis(config, out);
    } else if (name == "fit") {
        cmd_fit(config, options, out);
    } else if (name == "smooth") {
        cmd_smooth(config, options, out);
    } else if (name == "forecast") {
        cmd_forecast(config, options, out);
    } else if (name == "simulate") {
        cmd_simulate(config, out);
    } else if (name == "backtest") {
        cmd_backtest(config, out);
    } else if (name == "check-prop1") {
        cmd_prop1(config, out);
    } else {
        throw InputError("unknown command '" + name + "'");
    }
    out.write_manifest(name, to_json(config));
}

} // namespace bsp::cli
