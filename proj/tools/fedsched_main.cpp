#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fedsched/commands.hpp"

namespace {

using fedsched::ConfigError;
using fedsched::NumericalError;
using nlohmann::json;

struct CommonArgs {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* opt = cmd->add_option("--config", args.config_path, "config file (JSON)");
    if (config_required) opt->required();
    cmd->add_option("--seed", args.seed, "base seed");
    cmd->add_option("--out", args.out_dir, "output directory");
}

int execute(const std::string& subcommand, const CommonArgs& args, json params) {
    fedsched::RunConfig cfg = fedsched::load_config(args.config_path);
    fedsched::resolve_fleet(cfg, fedsched::RngStream(args.seed, 0));
    if (subcommand == "simulate" && !params.contains("seeds")) {
        // manifest carries the explicit seed list
        const int count = params.value("replicas", cfg.sim.replicas);
        std::vector<std::uint64_t> seeds;
        for (int i = 0; i < count; ++i) seeds.push_back(args.seed + static_cast<std::uint64_t>(i));
        params["seeds"] = seeds;
    }
    const fedsched::CommandResult result =
        fedsched::run_command(subcommand, cfg, params, args.out_dir, args.seed);
    fedsched::write_manifest(subcommand, cfg, params, args.seed, result.outputs, args.out_dir);
    std::cout << result.summary << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated learning scheduling and simulation over a lossy wireless uplink"};
    app.require_subcommand(1);

    CommonArgs predict_args, schedule_args, optimize_args, simulate_args, sweep_args;

    // predict
    auto* predict = app.add_subcommand("predict", "predicted global epochs over (K, El, gamma)");
    add_common(predict, predict_args);
    std::vector<double> ks{10}, els{20}, gammas{0.0};
    double epsilon = -1;
    predict->add_option("--K", ks, "participation sizes")->delimiter(',');
    predict->add_option("--El", els, "local epoch counts")->delimiter(',');
    predict->add_option("--gamma", gammas, "package loss rates")->delimiter(',');
    predict->add_option("--epsilon", epsilon, "target loss gap (default: config target_loss)");

    // schedule
    auto* schedule = app.add_subcommand("schedule", "one round's bandwidth/frequency allocation");
    add_common(schedule, schedule_args);
    std::string schedule_policy = "distributed";
    int schedule_k = 0, schedule_el = 0;
    std::vector<int> schedule_clients;
    schedule->add_option("--policy", schedule_policy, "distributed|centralized|even");
    schedule->add_option("--K", schedule_k, "participants to sample");
    schedule->add_option("--El", schedule_el, "local epochs");
    schedule->add_option("--clients", schedule_clients, "explicit client ids")->delimiter(',');

    // optimize
    auto* optimize = app.add_subcommand("optimize", "closed-form (K*, El*) plus grid surface");
    add_common(optimize, optimize_args);
    std::string optimize_policy = "distributed";
    double optimize_epsilon = -1;
    optimize->add_option("--policy", optimize_policy, "unit-cost scheduling policy");
    optimize->add_option("--epsilon", optimize_epsilon, "target loss gap");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "federated SGD runs on the synthetic task");
    add_common(simulate, simulate_args);
    std::string simulate_policy = "distributed";
    int simulate_k = 0, simulate_el = 0, simulate_replicas = 0;
    double simulate_epsilon = -1;
    simulate->add_option("--policy", simulate_policy, "scheduling policy");
    simulate->add_option("--K", simulate_k, "participants per round");
    simulate->add_option("--El", simulate_el, "local epochs");
    simulate->add_option("--epsilon", simulate_epsilon, "target loss gap");
    simulate->add_option("--replicas", simulate_replicas, "seed count");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "long-format CSV over one axis");
    add_common(sweep, sweep_args);
    std::string sweep_axis, sweep_mode = "analytic", sweep_policy = "distributed";
    std::vector<double> sweep_values;
    int sweep_epochs = 50, sweep_replicas = 0;
    sweep->add_option("--axis", sweep_axis, "K|El|gamma|cost_ratio|Var")->required();
    sweep->add_option("--values", sweep_values, "axis values")->required()->delimiter(',');
    sweep->add_option("--mode", sweep_mode, "analytic|simulated");
    sweep->add_option("--policy", sweep_policy, "scheduling policy");
    sweep->add_option("--epochs", sweep_epochs, "epochs per cost replicate (Var axis)");
    sweep->add_option("--replicas", sweep_replicas, "replicates per point");

    // replay
    auto* replay = app.add_subcommand("replay", "re-run a manifest bit-identically");
    std::string manifest_path, replay_out = "out";
    replay->add_option("manifest", manifest_path, "manifest.json path")->required();
    replay->add_option("--out", replay_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (predict->parsed()) {
            json params = {{"ks", ks}, {"els", els}, {"gammas", gammas}};
            if (epsilon > 0) params["epsilon"] = epsilon;
            return execute("predict", predict_args, params);
        }
        if (schedule->parsed()) {
            json params = {{"policy", schedule_policy}};
            if (!schedule_clients.empty()) params["clients"] = schedule_clients;
            if (schedule_k > 0) params["k"] = schedule_k;
            if (schedule_el > 0) params["el"] = schedule_el;
            return execute("schedule", schedule_args, params);
        }
        if (optimize->parsed()) {
            json params = {{"policy", optimize_policy}};
            if (optimize_epsilon > 0) params["epsilon"] = optimize_epsilon;
            return execute("optimize", optimize_args, params);
        }
        if (simulate->parsed()) {
            json params = {{"policy", simulate_policy}};
            if (simulate_k > 0) params["k"] = simulate_k;
            if (simulate_el > 0) params["el"] = simulate_el;
            if (simulate_epsilon > 0) params["epsilon"] = simulate_epsilon;
            if (simulate_replicas > 0) params["replicas"] = simulate_replicas;
            return execute("simulate", simulate_args, params);
        }
        if (sweep->parsed()) {
            json params = {{"axis", sweep_axis},
                           {"values", sweep_values},
                           {"mode", sweep_mode},
                           {"policy", sweep_policy},
                           {"epochs", sweep_epochs}};
            if (sweep_replicas > 0) params["replicas"] = sweep_replicas;
            return execute("sweep", sweep_args, params);
        }
        if (replay->parsed()) {
            const fedsched::CommandResult result =
                fedsched::replay_manifest(manifest_path, replay_out);
            std::cout << result.summary << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
