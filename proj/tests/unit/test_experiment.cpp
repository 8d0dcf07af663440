#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "heatlab/errors.hpp"
#include "heatlab/experiment.hpp"

using namespace heatlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("heatlab_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig small_scaling() {
    ExperimentConfig c;
    c.experiment = ExperimentKind::Scaling;
    c.chain.N = 20;
    c.K_list = {2, 3, 4};
    c.realizations = 4;
    c.threads = 1;
    return c;
}

}  // namespace

TEST_CASE("config fields round trip") {
    ExperimentConfig c;
    for (const auto& name : config_field_names()) {
        const std::string v = get_config_field(c, name);
        ExperimentConfig d;
        set_config_field(d, name, v);
        CHECK(get_config_field(d, name) == v);
        CHECK_FALSE(config_field_help(name).empty());
    }
    set_config_field(c, "K_list", "2, 4,8");
    CHECK(c.K_list == std::vector<int>{2, 4, 8});
    set_config_field(c, "dT_list", "[0.01,0.1]");
    CHECK(c.dT_list == std::vector<double>{0.01, 0.1});
    set_config_field(c, "delta_2", "0.7");
    CHECK_FALSE(c.delta_auto_2);
    CHECK(c.bath2.delta == 0.7);
    set_config_field(c, "q_kind_1", "random");
    CHECK(c.bath1.q_kind == SurfaceRecipe::RandomSymmetric);

    CHECK_THROWS_AS(set_config_field(c, "nope", "1"), ParameterError);
    CHECK_THROWS_AS(set_config_field(c, "N", "ten"), ParameterError);
    CHECK_THROWS_AS(set_config_field(c, "N", "2.5"), ParameterError);
    CHECK_THROWS_AS(set_config_field(c, "coupling", "odd"), ParameterError);
    CHECK_THROWS_AS(set_config_field(c, "formats", "xml"), ParameterError);
}

TEST_CASE("config validation") {
    ExperimentConfig c = small_scaling();
    CHECK_NOTHROW(c.validate());
    c.realizations = 0;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = small_scaling();
    c.K_list = {2, 2, 4};
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = small_scaling();
    c.bath2.temperature = c.bath1.temperature;
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c = small_scaling();
    c.experiment = ExperimentKind::Equilibrium;
    c.dT_list = {0.01, 0.04};
    CHECK_THROWS_AS(c.validate(), ParameterError);
    c.experiment = ExperimentKind::Spectral;
    c.realizations = 5;
    CHECK_THROWS_AS(c.validate(), ParameterError);

    c = small_scaling();
    c.bath1.temperature = 0.001;
    c.bath2.temperature = 0.002;
    bool warned = false;
    for (const auto& w : c.validate()) warned = warned || w.find("level spacing") != std::string::npos;
    CHECK(warned);

    CHECK_THROWS_AS(run_scaling_experiment([] {
                        auto x = small_scaling();
                        x.realizations = 0;
                        return x;
                    }()),
                    ParameterError);
}

TEST_CASE("JSON config file") {
    const fs::path dir = scratch("config");
    fs::create_directories(dir);
    const fs::path file = dir / "c.json";
    std::ofstream(file) << R"({"experiment": "strength", "N": 30, "w": 0.25, "K_list": [2, 4, 8],
                               "coupling": "dissimilar", "seed": 99})";
    ExperimentConfig c;
    load_config(c, file.string());
    CHECK(c.experiment == ExperimentKind::Strength);
    CHECK(c.chain.N == 30);
    CHECK(c.chain.w == 0.25);
    CHECK(c.K_list == std::vector<int>{2, 4, 8});
    CHECK(c.coupling == CouplingRecipe::Dissimilar);
    CHECK(c.seed == 99);

    std::ofstream(dir / "bad.json") << R"({"N": 30, "unknown": 1})";
    CHECK_THROWS_AS(load_config(c, (dir / "bad.json").string()), ParameterError);
    std::ofstream(dir / "broken.json") << "{";
    CHECK_THROWS_AS(load_config(c, (dir / "broken.json").string()), ParameterError);
    CHECK_THROWS_AS(load_config(c, (dir / "missing.json").string()), IoError);
}

TEST_CASE("scaling run: schema, identities, determinism") {
    const ExperimentConfig c = small_scaling();
    const RunRecord a = run_scaling_experiment(c);
    REQUIRE(a.table.rows.size() == 12);
    CHECK(a.table.columns == std::vector<std::string>{"K", "realization", "C", "I", "T0", "alpha", "numerator", "Z"});
    for (const auto& row : a.table.rows) {
        // Equal recipe: gamma = 1/2.
        CHECK(row[2] == doctest::Approx(0.5 / (row[4] * row[4]) * row[6] / row[7]).epsilon(1e-13));
        CHECK(row[3] == doctest::Approx(row[2] * 0.2));
        CHECK(row[2] > 0.0);
    }
    // Aggregates are recomputable from the rows.
    double mean = 0.0;
    for (int r = 0; r < 4; ++r) mean += a.table.rows[static_cast<std::size_t>(r)][2] / 4.0;
    CHECK(a.summary_value("mean_C_K2") == doctest::Approx(mean).epsilon(1e-14));
    CHECK(std::isfinite(a.summary_value("slope_C")));

    const fs::path d1 = scratch("det1"), d2 = scratch("det2");
    emit_outputs(a, d1.string());
    ExperimentConfig threaded = c;
    threaded.threads = 3;
    emit_outputs(run_scaling_experiment(threaded), d2.string());
    const std::string csv = slurp(d1 / "scaling.csv");
    CHECK(csv == slurp(d2 / "scaling.csv"));
    CHECK(csv.rfind("K,realization,C,I,T0,alpha,numerator,Z\n", 0) == 0);
    CHECK(csv.find("2,0,") != std::string::npos);

    const std::string manifest = slurp(d1 / "manifest.json");
    for (const char* key : {"\"experiment\"", "\"seed\"", "\"config\"", "\"created_at\"", "\"versions\"",
                            "\"summary\""}) {
        CHECK(manifest.find(key) != std::string::npos);
    }

    ExperimentConfig other = c;
    other.seed = c.seed + 1;
    CHECK(run_scaling_experiment(other).table.rows != a.table.rows);
}

TEST_CASE("emit_outputs edge cases") {
    RunRecord empty;
    empty.config.experiment = ExperimentKind::Equilibrium;
    empty.table.columns = table_columns(ExperimentKind::Equilibrium);
    const fs::path d = scratch("empty");
    const auto files = emit_outputs(empty, d.string());
    CHECK(files.size() == 2);
    CHECK(slurp(d / "equilibrium.csv") == "dT,err_exact_vs_gibbs,err_pert_vs_exact\n");
    CHECK(fs::exists(d / "manifest.json"));
    CHECK_FALSE(fs::exists(d / "equilibrium.csv.tmp"));

    const fs::path blocker = scratch("blocker");
    std::ofstream(blocker) << "file, not a directory";
    CHECK_THROWS_AS(emit_outputs(empty, (blocker / "sub").string()), IoError);
}

TEST_CASE("equilibrium experiment fixtures") {
    ExperimentConfig c;
    c.experiment = ExperimentKind::Equilibrium;
    c.chain.K = 2;
    c.chain.N = 20;
    c.chain.v = 0.3;
    c.chain.n_surf = 2;
    c.bath1.q_kind = c.bath2.q_kind = SurfaceRecipe::RandomSymmetric;
    c.bath1.temperature = 0.9;
    c.bath2.temperature = 1.1;

    SUBCASE("equal") {
        const RunRecord r = run_equilibrium_experiment(c);
        CHECK(r.summary_value("slope_exact_vs_gibbs") == doctest::Approx(2.0).epsilon(0.1));
        CHECK(r.table.rows.size() == 4);
    }
    SUBCASE("similar with the matching T0") {
        c.coupling = CouplingRecipe::Similar;
        const RunRecord r = run_equilibrium_experiment(c);
        CHECK(r.summary_value("coupling_ratio") == doctest::Approx(3.0));
        CHECK(r.summary_value("slope_exact_vs_gibbs") == doctest::Approx(2.0).epsilon(0.1));
    }
    SUBCASE("similar with the mean temperature") {
        c.coupling = CouplingRecipe::Similar;
        c.t0_from_mean = true;
        const RunRecord r = run_equilibrium_experiment(c);
        CHECK(r.summary_value("slope_exact_vs_gibbs") == doctest::Approx(1.0).epsilon(0.2));
        CHECK(r.summary_value("slope_pert_vs_exact") == doctest::Approx(2.0).epsilon(0.1));
    }
    SUBCASE("dissimilar") {
        c.coupling = CouplingRecipe::Dissimilar;
        const RunRecord r = run_equilibrium_experiment(c);
        CHECK(r.summary_value("coupling_class") == 2.0);
        CHECK(r.summary_value("slope_pert_vs_exact") == doctest::Approx(2.0).epsilon(0.1));
        CHECK(r.summary_value("bracket1_rel_max") <= 1e-10);
    }
}

TEST_CASE("linearity experiment") {
    ExperimentConfig c;
    c.experiment = ExperimentKind::Linearity;
    c.chain.K = 2;
    c.chain.N = 20;
    const RunRecord r = run_linearity_experiment(c);
    CHECK(r.summary_value("fit_vs_formula_rel") <= 0.02);
    CHECK(r.summary_value("flow_mismatch_max") <= 1e-9);
}

TEST_CASE("spectral experiment with a decoupled surface") {
    ExperimentConfig c;
    c.experiment = ExperimentKind::Spectral;
    c.chain.K = 2;
    c.chain.N = 40;
    c.chain.v = 0.0;
    c.realizations = 10;
    c.grid_span = 3.0;
    c.grid_points = 1201;
    c.eta = 0.02;
    const RunRecord r = run_spectral_experiment(c);
    CHECK(r.table.columns == std::vector<std::string>{"E", "rho_pastur", "rho_mc", "sf_analytic", "sf_mc"});
    CHECK(r.summary_value("sf_weight_mc") == doctest::Approx(1.0).epsilon(0.02));
    CHECK(r.summary_value("sf_weight_analytic") == doctest::Approx(1.0).epsilon(0.02));
}
