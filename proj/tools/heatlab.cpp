// heatlab: run ensemble heat-transport experiments on random-matrix chains.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "heatlab/errors.hpp"
#include "heatlab/experiment.hpp"

namespace {

constexpr const char* kOutDirEnv = "HEATLAB_OUT_DIR";

// Fields with a dedicated global flag.
bool is_global(const std::string& name) {
    return name == "experiment" || name == "seed" || name == "out_dir" || name == "realizations";
}

void print_record(const heatlab::RunRecord& rec, const std::vector<std::string>& files) {
    std::printf("%s: %zu rows, %.2f s\n", std::string(heatlab::to_string(rec.config.experiment)).c_str(),
                rec.table.rows.size(), rec.wall_seconds);
    for (const auto& [k, v] : rec.summary) std::printf("  %-28s %.10g\n", k.c_str(), v);
    for (const auto& f : files) std::printf("wrote %s\n", f.c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Heat conduction through random-matrix chains coupled to two baths.\n"
                 "Every config field can be given in a JSON file (--config) and overridden by a flag "
                 "of the same name.\nDefault output directory: $" +
                 std::string(kOutDirEnv) + ", else ./heatlab-out"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string seed, out_dir, realizations;
    app.add_option("--seed", seed, "master seed");
    app.add_option("--out-dir", out_dir, "output directory");
    app.add_option("--realizations", realizations, "ensemble size");

    const std::map<std::string, std::string> about = {
        {"scaling", "conductance vs chain length K"},
        {"equilibrium", "deviation of the steady state from Gibbs vs dT"},
        {"linearity", "exact current vs dT against the linear-response conductance"},
        {"spectral", "Pastur vs Monte-Carlo level density and strength function"},
        {"strength", "strength-function width and rho(0) across K_list"},
    };

    std::string config_path;
    std::map<std::string, std::string> overrides;
    for (const auto& [name, text] : about) {
        CLI::App* sub = app.add_subcommand(name, text);
        sub->add_option("--config", config_path, "JSON config file");
        for (const auto& field : heatlab::config_field_names()) {
            if (is_global(field)) continue;
            sub->add_option_function<std::string>(
                "--" + field, [&overrides, field](const std::string& v) { overrides[field] = v; },
                std::string(heatlab::config_field_help(field)));
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        heatlab::ExperimentConfig config;
        if (!config_path.empty()) heatlab::load_config(config, config_path);
        for (const auto& [k, v] : overrides) heatlab::set_config_field(config, k, v);
        heatlab::set_config_field(config, "experiment", app.get_subcommands().front()->get_name());
        if (!seed.empty()) heatlab::set_config_field(config, "seed", seed);
        if (!realizations.empty()) heatlab::set_config_field(config, "realizations", realizations);
        if (!out_dir.empty()) {
            config.out_dir = out_dir;
        } else if (config.out_dir.empty()) {
            const char* env = std::getenv(kOutDirEnv);
            config.out_dir = env && *env ? env : "heatlab-out";
        }
        config.validate();

        const heatlab::RunRecord rec = heatlab::run_experiment(config);
        const auto files = heatlab::emit_outputs(rec, config.out_dir);
        print_record(rec, files);
        return 0;
    } catch (const heatlab::ParameterError& e) {
        std::cerr << "heatlab: configuration error: " << e.what() << '\n';
        return 2;
    } catch (const heatlab::NumericalError& e) {
        std::cerr << "heatlab: numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const heatlab::IoError& e) {
        std::cerr << "heatlab: i/o error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "heatlab: " << e.what() << '\n';
        return 1;
    }
}
