#pragma once

// Ensemble experiments built from the chain, bath, steady-state, transport
// and Green-function layers. Configuration is a flat set of named fields so
// the JSON config file and the command-line flags share one vocabulary.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "heatlab/bath.hpp"
#include "heatlab/chain.hpp"

namespace heatlab {

enum class ExperimentKind { Scaling, Equilibrium, Linearity, Spectral, Strength };

std::string_view to_string(ExperimentKind kind) noexcept;
ExperimentKind parse_experiment_kind(std::string_view name);

/// How bath 2 relates to bath 1.
///   equal:      same end and surface operator as bath 1, X2 = X1
///   similar:    same operator, a0_1 = similar_ratio * a0_2, X1 = a X2
///   dissimilar: bath 2 sits on block K with its own operator
enum class CouplingRecipe { Equal, Similar, Dissimilar };

struct ExperimentConfig {
    ExperimentKind experiment = ExperimentKind::Scaling;
    ChainParams chain;
    BathSpec bath1;
    BathSpec bath2;
    bool delta_auto_1 = true;  ///< delta = 10 x spectral range estimate, per realization
    bool delta_auto_2 = true;
    CouplingRecipe coupling = CouplingRecipe::Equal;
    double similar_ratio = 3.0;
    bool t0_from_mean = false;  ///< equilibrium: take T0 = (T1 + T2)/2 regardless of class

    std::vector<int> K_list{2, 3, 4, 6, 8};
    /// Half temperature differences as fractions of (T1 + T2)/2.
    std::vector<double> dT_list{0.01, 0.02, 0.04, 0.08};

    int grid_points = 401;
    double grid_span = 2.5;  ///< in units of lambda' = sqrt(lambda^2 + 2 w^2)
    double eta = 0.0;        ///< 0 picks the per-experiment default

    int realizations = 50;
    std::uint64_t seed = 20240611;
    std::string out_dir;
    std::vector<std::string> formats{"csv", "json"};
    int threads = 0;  ///< 0 = hardware concurrency
    double class_tol = 1e-8;

    ExperimentConfig();

    /// Throws ParameterError; returns soft warnings.
    std::vector<std::string> validate() const;
};

/// Names accepted by set_config_field, in a stable order.
const std::vector<std::string>& config_field_names();
/// One-line description of a field for CLI help.
std::string_view config_field_help(std::string_view name);

/// Lists are comma separated. Unknown names and malformed values throw ParameterError.
void set_config_field(ExperimentConfig& config, std::string_view name, std::string_view value);
std::string get_config_field(const ExperimentConfig& config, std::string_view name);

/// Flat JSON object whose keys are field names. Throws IoError when the file
/// cannot be read, ParameterError on bad content.
void load_config(ExperimentConfig& config, const std::string& path);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct RunRecord {
    ExperimentConfig config;
    Table table;
    std::vector<std::pair<std::string, double>> summary;  ///< aggregates and fit results, ordered
    std::vector<std::string> events;                      ///< warnings, retries
    double wall_seconds = 0.0;

    double summary_value(std::string_view key) const;  ///< throws std::out_of_range
};

std::vector<std::string> table_columns(ExperimentKind kind);

RunRecord run_scaling_experiment(const ExperimentConfig& config);
RunRecord run_equilibrium_experiment(const ExperimentConfig& config);
RunRecord run_linearity_experiment(const ExperimentConfig& config);
RunRecord run_spectral_experiment(const ExperimentConfig& config);
RunRecord run_strength_experiment(const ExperimentConfig& config);
RunRecord run_experiment(const ExperimentConfig& config);

/// Writes <out_dir>/<experiment>.csv and <out_dir>/manifest.json for the
/// requested formats ("csv", "json"). Throws IoError; no partial files remain.
std::vector<std::string> emit_outputs(const RunRecord& record, const std::string& out_dir);

}  // namespace heatlab
