#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedsched/convergence.hpp"
#include "fedsched/rng.hpp"
#include "fedsched/types.hpp"

namespace fedsched {

/// Generative fleet description: per-client data size, chip coefficient and
/// unit power are drawn uniformly in [mean*(1-var), mean*(1+var)].
struct FleetSpec {
    int num_clients = 50;
    double mean_data_size = 500.0;
    double mean_chip_coeff = 5e-27;
    double mean_unit_power = 4e-7;
    double var = 0.0;
    double f_min = 1e8;
    double f_max = 2e9;

    void validate() const {
        require(num_clients >= 1, "fleet.num_clients must be >= 1");
        require(var >= 0 && var < 1, "fleet.var out of range [0,1)");
        require(mean_data_size >= 1, "fleet.mean_data_size must be >= 1");
        require(mean_chip_coeff > 0, "fleet.mean_chip_coeff must be > 0");
        require(mean_unit_power > 0, "fleet.mean_unit_power must be > 0");
        require(f_min > 0 && f_min <= f_max, "fleet needs 0 < f_min <= f_max");
    }
};

/// Simulation knobs for the synthetic federated task.
struct SimConfig {
    int dimension = 10;
    double skew = 0.0;               // non-iid knob: per-client parameter shift
    double minibatch_fraction = 0.1;
    bool full_batch = false;
    double ridge = 1.0;
    double label_noise = 0.5;
    std::string family = "quadratic";  // or "logistic"
    int max_epochs = 150;
    double lr_safety = 1.0;
    int lambda_burn_in = 5;
    int replicas = 20;
};

/// Hyper-parameter inputs used by predict/optimize/simulate.
struct HyperConfig {
    int participants = 10;
    int local_epochs = 20;
    int el_max = 50;
};

/// Optional explicit unit costs; when absent the CLI derives them from the
/// fleet and the scheduling policy.
struct UnitCostsOverride {
    std::optional<double> upload_unit;
    std::optional<double> compute_unit;
    double broadcast_time = 0.0;
};

/// Everything a run needs, resolved from one config document.
struct RunConfig {
    SystemConfig system;
    std::optional<FleetSpec> fleet_spec;  // present when clients are generative
    Fleet clients;                        // resolved (possibly after drawing)
    bool gains_given = false;             // explicit channel gains in the config
    TrainingConstants constants;
    double target_loss = 1.0;             // epsilon
    HyperConfig hyper;
    SimConfig sim;
    UnitCostsOverride costs;
};

/// Draws a concrete fleet from a generative spec. Channel gains are left at 1
/// and must be sampled separately; weights default to q_j proportional to D_j.
Fleet generate_fleet(const FleetSpec& spec, RngStream rng);

/// Normalizes weights to sum 1 (filling q_j prop. to D_j when all are unset)
/// and validates every client. Warns on stderr when explicit weights needed
/// renormalizing; throws on unnormalizable ones.
void finalize_weights(Fleet& fleet);

/// Parses the JSON config document. Does not draw generative fleets; call
/// resolve_fleet for that.
RunConfig parse_config(const nlohmann::json& doc);

/// Loads and parses a config file.
RunConfig load_config(const std::string& path);

/// Materializes cfg.clients: draws the fleet from the spec if generative, and
/// samples channel gains for clients without explicit ones.
void resolve_fleet(RunConfig& cfg, RngStream rng);

/// Serializes the resolved config (explicit client list included) so a
/// manifest replay rebuilds the identical run.
nlohmann::json config_to_json(const RunConfig& cfg);

} // namespace fedsched
