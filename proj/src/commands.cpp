#include "fedsched/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedsched/cost_expectation.hpp"
#include "fedsched/csv.hpp"
#include "fedsched/hyperopt.hpp"
#include "fedsched/sampling.hpp"
#include "fedsched/training.hpp"
#include "fedsched/util.hpp"

namespace fedsched {

using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "fedsched 0.1.0";

// fixed stream ids per purpose; manifests only need the seed
constexpr std::uint64_t kStreamTask = 3;
constexpr std::uint64_t kStreamSchedule = 4;
constexpr std::uint64_t kStreamCosts = 5;
constexpr std::uint64_t kStreamRun = 100;

SchedulePolicy parse_policy(const std::string& s) {
    if (s == "distributed") return SchedulePolicy::distributed;
    if (s == "centralized") return SchedulePolicy::centralized;
    if (s == "even") return SchedulePolicy::even;
    throw ConfigError("unknown policy: " + s);
}

std::string out_path(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / name).string();
}

UnitCosts derive_unit_costs(const RunConfig& cfg, const Fleet& fleet, SchedulePolicy policy) {
    UnitCosts costs;
    costs.upload_unit = cfg.costs.upload_unit
                            ? *cfg.costs.upload_unit
                            : unit_upload_cost(fleet, cfg.system, policy);
    costs.compute_unit = cfg.costs.compute_unit
                             ? *cfg.costs.compute_unit
                             : unit_compute_cost(fleet, cfg.system, policy);
    costs.broadcast_time = cfg.system.broadcast_time_s;
    return costs;
}

Fleet pruned_fleet(const RunConfig& cfg) {
    const auto keep = prune_candidates(cfg.clients, cfg.system);
    if (keep.size() == cfg.clients.size()) return cfg.clients;
    Fleet out;
    out.reserve(keep.size());
    for (int idx : keep) out.push_back(cfg.clients[static_cast<std::size_t>(idx)]);
    finalize_weights(out);  // renormalizes the surviving weights
    return out;
}

TaskSpec task_spec_for(const RunConfig& cfg, const Fleet& fleet) {
    TaskSpec spec;
    spec.num_clients = static_cast<int>(fleet.size());
    spec.data_sizes.reserve(fleet.size());
    for (const auto& c : fleet) spec.data_sizes.push_back(c.data_size);
    spec.skew = cfg.sim.skew;
    spec.dimension = cfg.sim.dimension;
    spec.family = cfg.sim.family == "logistic" ? LossFamily::logistic : LossFamily::quadratic;
    spec.ridge = cfg.sim.ridge;
    spec.label_noise = cfg.sim.label_noise;
    return spec;
}

SimOptions sim_options_for(const RunConfig& cfg, int k, int el, double epsilon,
                           SchedulePolicy policy) {
    SimOptions opt;
    opt.participants = k;
    opt.local_epochs = el;
    opt.epsilon = epsilon;
    opt.max_epochs = cfg.sim.max_epochs;
    opt.minibatch_fraction = cfg.sim.minibatch_fraction;
    opt.full_batch = cfg.sim.full_batch;
    opt.policy = policy;
    opt.lr_safety = cfg.sim.lr_safety;
    opt.lambda_burn_in = cfg.sim.lambda_burn_in;
    return opt;
}

double median(std::vector<double> v) {
    if (v.empty()) return -1.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

CommandResult cmd_predict(const RunConfig& cfg, const json& params, const std::string& dir) {
    const auto ks = params.at("ks").get<std::vector<double>>();
    const auto els = params.at("els").get<std::vector<double>>();
    const auto gammas = params.at("gammas").get<std::vector<double>>();
    const double epsilon = params.value("epsilon", cfg.target_loss);
    require(!ks.empty() && !els.empty() && !gammas.empty(), "predict: empty value lists");

    const double avg_d = average_data_size(cfg.clients);
    CsvWriter csv(out_path(dir, "predict.csv"),
                  {"K", "El", "gamma", "D", "g_epsilon"});
    for (double gamma : gammas) {
        for (double el : els) {
            for (double k : ks) {
                const double g = predict_global_epochs(cfg.constants, epsilon, k, el, gamma, avg_d);
                csv.field(k).field(el).field(gamma).field(avg_d).field(g);
                csv.end_row();
            }
        }
    }
    std::ostringstream summary;
    summary << "predict: " << ks.size() * els.size() * gammas.size() << " rows, epsilon="
            << epsilon;
    return {{"predict.csv"}, summary.str()};
}

CommandResult cmd_schedule(const RunConfig& cfg, const json& params, const std::string& dir,
                           std::uint64_t seed) {
    const SchedulePolicy policy = parse_policy(params.value("policy", "distributed"));
    const int el = params.value("el", cfg.hyper.local_epochs);

    std::vector<int> selected;
    if (params.contains("clients")) {
        selected = params.at("clients").get<std::vector<int>>();
        for (int id : selected) {
            require(id >= 0 && id < static_cast<int>(cfg.clients.size()),
                    "schedule: client id out of range");
        }
    } else {
        const int k = params.value("k", cfg.hyper.participants);
        RngStream rng = RngStream(seed, kStreamSchedule);
        selected = sample_participants(rng, cfg.clients, k, cfg.system.selection);
    }

    const Schedule sched = make_schedule(policy, 0, selected, el, cfg.clients, cfg.system);
    const KktResiduals kkt = kkt_residuals(sched, cfg.clients, cfg.system);

    CsvWriter csv(out_path(dir, "schedule.csv"),
                  {"round", "client", "a_j", "f_j", "t_u", "t_n", "e_u", "e_n"});
    for (std::size_t i = 0; i < sched.clients.size(); ++i) {
        const Client& c = cfg.clients[static_cast<std::size_t>(sched.clients[i])];
        const double r0 = unit_rate(c, cfg.system);
        csv.field(sched.round)
            .field(c.id)
            .field(sched.shares[i])
            .field(sched.freqs[i])
            .field(upload_time(cfg.system.model_size_bits, sched.shares[i],
                               cfg.system.total_bandwidth_hz, r0))
            .field(local_latency(el, c.data_size, cfg.system.cycles_per_sample, sched.freqs[i]))
            .field(upload_energy(c.unit_power, cfg.system.model_size_bits, r0))
            .field(local_energy(el, c.chip_coeff, sched.freqs[i], c.data_size,
                                cfg.system.cycles_per_sample));
        csv.end_row();
    }

    CsvWriter kcsv(out_path(dir, "kkt.csv"),
                   {"client", "beta", "stationarity_a", "comp_slack", "boundary", "dual_r",
                    "stationarity_f", "slackness"});
    for (std::size_t i = 0; i < sched.clients.size(); ++i) {
        kcsv.field(cfg.clients[static_cast<std::size_t>(sched.clients[i])].id)
            .field(kkt.betas[i])
            .field(kkt.stationarity_a[i])
            .field(kkt.comp_slack[i])
            .field(static_cast<int>(kkt.boundary[i] ? 1 : 0))
            .field(kkt.dual_r)
            .field(kkt.stationarity_f)
            .field(kkt.slackness);
        kcsv.end_row();
    }

    std::ostringstream summary;
    summary << "schedule: K=" << sched.clients.size() << " El=" << el << " objective="
            << sched.objective << " max|stationarity_a|=" << kkt.max_abs_stationarity_a();
    return {{"schedule.csv", "kkt.csv"}, summary.str()};
}

CommandResult cmd_optimize(const RunConfig& cfg, const json& params, const std::string& dir) {
    const SchedulePolicy policy = parse_policy(params.value("policy", "distributed"));
    const Fleet fleet = pruned_fleet(cfg);
    const UnitCosts costs = derive_unit_costs(cfg, fleet, policy);
    const double avg_d = average_data_size(fleet);
    const int n = static_cast<int>(fleet.size());
    const double gamma = cfg.system.loss_rate;
    const double epsilon = params.value("epsilon", cfg.target_loss);

    const HyperParams rec = optimal_hyperparams(cfg.constants, epsilon, avg_d, gamma, costs, n,
                                                cfg.hyper.el_max);
    const LocalEpochChoice el_choice = optimal_local_epochs(cfg.constants, cfg.hyper.el_max);
    ParticipationChoice k_choice;
    k_choice.recommended = rec.participants;
    if (!cfg.constants.iid()) {
        k_choice = optimal_participation(cfg.constants, epsilon, avg_d, gamma, costs,
                                         rec.local_epochs, n);
    }

    std::vector<int> ks(static_cast<std::size_t>(n));
    std::iota(ks.begin(), ks.end(), 1);
    std::vector<int> els(static_cast<std::size_t>(cfg.hyper.el_max));
    std::iota(els.begin(), els.end(), 1);
    const GridSearchResult grid =
        grid_search_hyperparams(cfg.constants, epsilon, avg_d, gamma, costs, ks, els);

    CsvWriter csv(out_path(dir, "surface.csv"), {"K", "El", "g_epsilon", "epoch_cost", "total"});
    for (const auto& p : grid.surface) {
        csv.field(p.k).field(p.local_epochs).field(p.g_epsilon).field(p.epoch_cost).field(p.total);
        csv.end_row();
    }

    json rec_json = {{"participants", rec.participants},
                     {"local_epochs", rec.local_epochs},
                     {"k_star_real", k_choice.real},
                     {"el_star_real", el_choice.unbounded ? -1.0 : el_choice.real},
                     {"rho0", rec.rho0},
                     {"iid_advisory", rec.iid_advisory},
                     {"grid_best_k", grid.best_k},
                     {"grid_best_el", grid.best_local_epochs},
                     {"upload_unit", costs.upload_unit},
                     {"compute_unit", costs.compute_unit},
                     {"broadcast_time", costs.broadcast_time},
                     {"pruned_fleet_size", n}};
    std::ofstream rf(out_path(dir, "recommendation.json"));
    rf << rec_json.dump(2) << "\n";

    std::ostringstream summary;
    summary << "optimize: K*=" << rec.participants << " El*=" << rec.local_epochs
            << " (grid argmin K=" << grid.best_k << " El=" << grid.best_local_epochs << ")";
    if (rec.iid_advisory) summary << " [iid: communication term absent, K=1 advisory]";
    return {{"surface.csv", "recommendation.json"}, summary.str()};
}

CommandResult cmd_simulate(const RunConfig& cfg, const json& params, const std::string& dir,
                           std::uint64_t seed) {
    const SchedulePolicy policy = parse_policy(params.value("policy", "distributed"));
    const int k = params.value("k", cfg.hyper.participants);
    const int el = params.value("el", cfg.hyper.local_epochs);
    const double epsilon = params.value("epsilon", cfg.target_loss);
    std::vector<std::uint64_t> seeds;
    if (params.contains("seeds")) {
        seeds = params.at("seeds").get<std::vector<std::uint64_t>>();
    } else {
        const int count = params.value("replicas", cfg.sim.replicas);
        for (int i = 0; i < count; ++i) seeds.push_back(seed + static_cast<std::uint64_t>(i));
    }
    require(!seeds.empty(), "simulate: no seeds");

    const Fleet fleet = pruned_fleet(cfg);
    const SyntheticTask task =
        make_synthetic_task(task_spec_for(cfg, fleet), RngStream(seed, kStreamTask));
    const SimOptions opt = sim_options_for(cfg, k, el, epsilon, policy);

    std::vector<TrainingTrace> traces(seeds.size());
    std::vector<std::string> failures(seeds.size());
    parallel_for(static_cast<int>(seeds.size()), [&](int i) {
        try {
            traces[static_cast<std::size_t>(i)] = run_training(
                task, fleet, cfg.system, opt,
                RngStream(seeds[static_cast<std::size_t>(i)], kStreamRun));
        } catch (const NumericalError& e) {
            failures[static_cast<std::size_t>(i)] = e.what();
        }
    });
    for (const auto& f : failures) {
        if (!f.empty()) throw NumericalError(f);
    }

    std::vector<std::string> outputs;
    CsvWriter summary_csv(out_path(dir, "summary.csv"),
                          {"seed", "g_epsilon", "epochs_run", "lambda_hat", "total_time",
                           "total_energy", "retransmissions"});
    outputs.push_back("summary.csv");
    std::vector<double> reached;
    int not_reached = 0;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        const TrainingTrace& t = traces[i];
        const std::string name = "trace_" + std::to_string(seeds[i]) + ".csv";
        CsvWriter tcsv(out_path(dir, name),
                       {"epoch", "loss_gap", "lambda_hat", "K_gamma", "time_cost",
                        "energy_cost"});
        for (int e = 0; e < t.epochs(); ++e) {
            tcsv.field(e + 1)
                .field(t.loss_gap[static_cast<std::size_t>(e)])
                .field(t.lambda_running[static_cast<std::size_t>(e)])
                .field(t.survivor_counts[static_cast<std::size_t>(e)])
                .field(t.time_cost[static_cast<std::size_t>(e)])
                .field(t.energy_cost[static_cast<std::size_t>(e)]);
            tcsv.end_row();
        }
        outputs.push_back(name);
        const int g = measure_g_epsilon(t, epsilon);
        if (g > 0) reached.push_back(g);
        else ++not_reached;
        summary_csv.field(static_cast<long long>(seeds[i]))
            .field(g)
            .field(t.epochs())
            .field(t.lambda_hat)
            .field(t.time_cost.empty() ? 0.0 : t.time_cost.back())
            .field(t.energy_cost.empty() ? 0.0 : t.energy_cost.back())
            .field(t.retransmissions);
        summary_csv.end_row();
    }

    std::ostringstream summary;
    summary << "simulate: " << seeds.size() << " seeds, median G_eps="
            << median(reached) << ", not reached: " << not_reached << "/" << seeds.size();
    return {outputs, summary.str()};
}

CommandResult cmd_sweep(const RunConfig& cfg, const json& params, const std::string& dir,
                        std::uint64_t seed) {
    const std::string axis = params.at("axis").get<std::string>();
    const auto values = params.at("values").get<std::vector<double>>();
    const std::string mode = params.value("mode", "analytic");
    const SchedulePolicy policy = parse_policy(params.value("policy", "distributed"));
    const int epochs = params.value("epochs", 50);
    const int replicas = params.value("replicas", cfg.sim.replicas);
    require(!values.empty(), "sweep: empty value list");
    require(mode == "analytic" || mode == "simulated", "sweep: mode must be analytic|simulated");

    const double avg_d = average_data_size(cfg.clients);
    const double epsilon = cfg.target_loss;
    CsvWriter csv(out_path(dir, "sweep.csv"),
                  {"axis", "value", "replicate", "metric", "result"});

    const auto analytic_g = [&](double k, double el, double gamma) {
        return predict_global_epochs(cfg.constants, epsilon, k, el, gamma, avg_d);
    };

    const auto simulated_g = [&](int k, int el, double gamma, double axis_value) {
        RunConfig local = cfg;
        local.system.loss_rate = gamma;
        const Fleet fleet = pruned_fleet(local);
        const SyntheticTask task =
            make_synthetic_task(task_spec_for(local, fleet), RngStream(seed, kStreamTask));
        const SimOptions opt = sim_options_for(local, k, el, epsilon, policy);
        std::vector<double> gs(static_cast<std::size_t>(replicas));
        std::vector<std::string> errors(static_cast<std::size_t>(replicas));
        parallel_for(replicas, [&](int i) {
            try {
                const TrainingTrace t =
                    run_training(task, fleet, local.system, opt,
                                 RngStream(seed + static_cast<std::uint64_t>(i), kStreamRun));
                gs[static_cast<std::size_t>(i)] = measure_g_epsilon(t, epsilon);
            } catch (const NumericalError& e) {
                errors[static_cast<std::size_t>(i)] = e.what();
            }
        });
        for (const auto& e : errors) {
            if (!e.empty()) throw NumericalError(e);
        }
        for (int i = 0; i < replicas; ++i) {
            csv.field(axis).field(axis_value).field(i).field(std::string("g_epsilon"))
                .field(gs[static_cast<std::size_t>(i)]);
            csv.end_row();
        }
    };

    for (double value : values) {
        if (axis == "K") {
            if (mode == "analytic") {
                csv.field(axis).field(value).field(0).field(std::string("g_epsilon"))
                    .field(analytic_g(value, cfg.hyper.local_epochs, cfg.system.loss_rate));
                csv.end_row();
            } else {
                simulated_g(static_cast<int>(value), cfg.hyper.local_epochs,
                            cfg.system.loss_rate, value);
            }
        } else if (axis == "El") {
            if (mode == "analytic") {
                csv.field(axis).field(value).field(0).field(std::string("g_epsilon"))
                    .field(analytic_g(cfg.hyper.participants, value, cfg.system.loss_rate));
                csv.end_row();
            } else {
                simulated_g(cfg.hyper.participants, static_cast<int>(value),
                            cfg.system.loss_rate, value);
            }
        } else if (axis == "gamma") {
            if (mode == "analytic") {
                csv.field(axis).field(value).field(0).field(std::string("g_epsilon"))
                    .field(analytic_g(cfg.hyper.participants, cfg.hyper.local_epochs, value));
                csv.end_row();
            } else {
                simulated_g(cfg.hyper.participants, cfg.hyper.local_epochs, value, value);
            }
        } else if (axis == "cost_ratio") {
            require(mode == "analytic", "sweep: cost_ratio axis is analytic only");
            const Fleet fleet = pruned_fleet(cfg);
            UnitCosts costs = derive_unit_costs(cfg, fleet, policy);
            // rescale the upload unit so (C_n0 + T_d/El)/C_u0 hits the target
            require(value > 0, "sweep: cost_ratio values must be positive");
            costs.upload_unit =
                (costs.compute_unit + costs.broadcast_time / cfg.hyper.local_epochs) / value;
            const ParticipationChoice k_choice = optimal_participation(
                cfg.constants, epsilon, avg_d, cfg.system.loss_rate, costs,
                cfg.hyper.local_epochs, static_cast<int>(fleet.size()));
            csv.field(axis).field(value).field(0).field(std::string("k_star"))
                .field(k_choice.real);
            csv.end_row();
            csv.field(axis).field(value).field(0).field(std::string("k_recommended"))
                .field(k_choice.recommended);
            csv.end_row();
        } else if (axis == "Var") {
            require(mode == "simulated", "sweep: Var axis is simulated only");
            require(cfg.fleet_spec.has_value(), "sweep: Var axis needs a generative fleet");
            FleetSpec spec = *cfg.fleet_spec;
            spec.var = value;
            const Fleet fleet = generate_fleet(spec, RngStream(seed, 1));
            const auto stats = compare_policies(
                fleet, cfg.system, cfg.hyper.participants, cfg.hyper.local_epochs,
                {policy, SchedulePolicy::even}, epochs, replicas, RngStream(seed, kStreamCosts));
            for (int r = 0; r < replicas; ++r) {
                csv.field(axis).field(value).field(r).field(std::string("cost_proposed"))
                    .field(stats[0].replicate_means[static_cast<std::size_t>(r)]);
                csv.end_row();
                csv.field(axis).field(value).field(r).field(std::string("cost_even"))
                    .field(stats[1].replicate_means[static_cast<std::size_t>(r)]);
                csv.end_row();
            }
        } else {
            throw ConfigError("sweep: unknown axis " + axis);
        }
    }
    return {{"sweep.csv"}, "sweep: axis=" + axis + " mode=" + mode};
}

} // namespace

CommandResult run_command(const std::string& subcommand, const RunConfig& cfg,
                          const json& params, const std::string& out_dir, std::uint64_t seed) {
    if (subcommand == "predict") return cmd_predict(cfg, params, out_dir);
    if (subcommand == "schedule") return cmd_schedule(cfg, params, out_dir, seed);
    if (subcommand == "optimize") return cmd_optimize(cfg, params, out_dir);
    if (subcommand == "simulate") return cmd_simulate(cfg, params, out_dir, seed);
    if (subcommand == "sweep") return cmd_sweep(cfg, params, out_dir, seed);
    throw ConfigError("unknown subcommand: " + subcommand);
}

std::string write_manifest(const std::string& subcommand, const RunConfig& cfg,
                           const json& params, std::uint64_t seed,
                           const std::vector<std::string>& outputs,
                           const std::string& out_dir) {
    json doc;
    doc["tool"] = kToolVersion;
    doc["subcommand"] = subcommand;
    doc["seed"] = seed;
    doc["params"] = params;
    doc["config"] = config_to_json(cfg);
    doc["outputs"] = outputs;
    const std::string path = out_path(out_dir, "manifest.json");
    std::ofstream out(path);
    out << doc.dump(2) << "\n";
    return path;
}

CommandResult replay_manifest(const std::string& manifest_path, const std::string& out_dir) {
    std::ifstream in(manifest_path);
    if (!in.good()) throw ConfigError("manifest not found: " + manifest_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("manifest parse error: ") + e.what());
    }
    const auto subcommand = doc.at("subcommand").get<std::string>();
    const auto seed = doc.at("seed").get<std::uint64_t>();
    RunConfig cfg = parse_config(doc.at("config"));
    resolve_fleet(cfg, RngStream(seed, 0));  // no-op: manifests store explicit clients
    CommandResult result = run_command(subcommand, cfg, doc.at("params"), out_dir, seed);
    write_manifest(subcommand, cfg, doc.at("params"), seed, result.outputs, out_dir);
    return result;
}

} // namespace fedsched
