#include "commands.hpp"
#include "outputs.hpp"
#include "run_config.hpp"

#include "bsp/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#ifndef BSP_VERSION
#define BSP_VERSION "unknown"
#endif

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> horizons;
    std::optional<std::string> origins;
    std::optional<std::string> country;
    std::optional<std::string> gender;
    bool dump_matrices = false;
};

std::string one_line(std::string text) {
    for (char& c : text) {
        if (c == '\n' || c == '\r') {
            c = ' ';
        }
    }
    while (!text.empty() && text.back() == ' ') {
        text.pop_back();
    }
    return text;
}

const char* describe(const std::string& name) {
    if (name == "basis") return "write the design matrix and peak ages";
    if (name == "fit") return "estimate hyperparameters by marginal likelihood";
    if (name == "smooth") return "smoothed coefficient and slope trajectories";
    if (name == "forecast") return "multi-horizon forecasts with 95% bands";
    if (name == "simulate") return "simulate a surface from the model";
    if (name == "backtest") return "rolling-origin evaluation";
    return "Poisson-lognormal approximation check";
}

bsp::cli::RunConfig resolve(const Flags& flags, bsp::cli::RunOptions& options) {
    nlohmann::json doc = nlohmann::json::object();
    if (!flags.config.empty()) {
        options.config_path = flags.config;
        options.config_bytes = bsp::cli::read_file(flags.config);
        try {
            doc = nlohmann::json::parse(options.config_bytes);
        } catch (const nlohmann::json::exception& e) {
            throw bsp::InputError("config '" + flags.config + "' is not valid JSON: " + e.what());
        }
    }
    bsp::cli::RunConfig config = bsp::cli::parse_config(doc);
    if (flags.seed) {
        config.seed = *flags.seed;
    }
    if (flags.out) {
        config.out = *flags.out;
    }
    if (flags.horizons) {
        config.horizons = *flags.horizons;
        config.backtest.horizons = *flags.horizons;
    }
    if (flags.origins) {
        const auto [first, last] = bsp::cli::parse_origins(*flags.origins);
        config.backtest.origins.clear();
        for (int y = first; y <= last; ++y) {
            config.backtest.origins.push_back(y);
        }
    }
    if (flags.country) {
        config.country = *flags.country;
    }
    if (flags.gender) {
        config.genders = {bsp::parse_gender(*flags.gender)};
    }
    config.propagate_seed();
    config.validate();
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"B-spline process models for age-period log-mortality surfaces", "bsp"};
    app.set_version_flag("--version", BSP_VERSION);
    app.require_subcommand(1, 1);

    Flags flags;
    for (const auto& name : bsp::cli::kCommands) {
        CLI::App* sub = app.add_subcommand(name, describe(name));
        sub->add_option("--config", flags.config, "JSON run configuration");
        sub->add_option("--seed", flags.seed, "random seed");
        sub->add_option("--out", flags.out, "output directory");
        sub->add_option("--horizons", flags.horizons, "forecast horizons");
        sub->add_option("--origins", flags.origins, "backtest origins, A..B");
        sub->add_option("--country", flags.country, "country code");
        sub->add_option("--gender", flags.gender, "f or m");
        if (name == "fit" || name == "smooth" || name == "forecast") {
            sub->add_flag("--dump-matrices", flags.dump_matrices, "write the state-space matrices as CSV");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "bsp: usage error: " << one_line(e.what()) << "\n";
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        bsp::cli::RunOptions options;
        options.dump_matrices = flags.dump_matrices;
        const bsp::cli::RunConfig config = resolve(flags, options);
        bsp::cli::run_command(name, config, options);
    } catch (const std::exception& e) {
        std::cerr << "bsp: error: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
