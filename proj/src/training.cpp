#include "fedsched/training.hpp"

#include <algorithm>
#include <cmath>

#include "fedsched/sampling.hpp"
#include "fedsched/util.hpp"

namespace fedsched {

namespace {

// fixed child-stream ids so traces replay exactly
constexpr std::uint64_t kStreamGains = 11;
constexpr std::uint64_t kStreamSelect = 12;
constexpr std::uint64_t kStreamLoss = 13;
constexpr std::uint64_t kStreamBatch = 14;

/// Diversity ratio of the clients' full gradients at w under the active
/// aggregation weights.
std::optional<double> diversity_at(const SyntheticTask& task, const std::vector<int>& members,
                                   const Eigen::VectorXd& member_weights,
                                   const Eigen::VectorXd& w) {
    Eigen::MatrixXd grads(static_cast<Eigen::Index>(members.size()), task.dimension);
    for (std::size_t i = 0; i < members.size(); ++i) {
        grads.row(static_cast<Eigen::Index>(i)) = task.client_gradient(members[i], w).transpose();
    }
    return noniid_ratio(grads, member_weights);
}

} // namespace

TrainingTrace run_training(const SyntheticTask& task, const Fleet& fleet,
                           const SystemConfig& cfg, const SimOptions& opt, RngStream rng) {
    require(static_cast<int>(fleet.size()) == task.num_clients(),
            "run_training: fleet/task size mismatch");
    require(opt.participants >= 1 && opt.participants <= task.num_clients(),
            "run_training: K out of range");
    require(opt.local_epochs >= 1, "run_training: local_epochs must be >= 1");
    require(opt.epsilon > 0, "run_training: epsilon must be > 0");

    TrainingTrace trace;
    trace.seed = rng.seed();

    // schedule from the measured regularity of the task
    Eigen::VectorXd all_weights = task.weights;
    std::vector<int> everyone(static_cast<std::size_t>(task.num_clients()));
    for (int j = 0; j < task.num_clients(); ++j) everyone[static_cast<std::size_t>(j)] = j;
    trace.lambda_init =
        diversity_at(task, everyone, all_weights, task.initial_weight).value_or(1.0);
    trace.lambda_init = std::max(1.0, trace.lambda_init);

    const double lam_eff = trace.lambda_init * opt.lr_safety;
    trace.schedule = LearningRateSchedule::theory_default(task.smoothness, task.pl_constant,
                                                          std::max(1.0, lam_eff));
    // the analysis additionally needs eta <= 1/(L*lambda); clamp early steps
    const double rate_cap = 1.0 / (task.smoothness * std::max(1.0, lam_eff));

    NoniidTracker tracker(opt.lambda_burn_in);

    RngStream gain_rng = rng.split(kStreamGains);
    RngStream select_rng = rng.split(kStreamSelect);
    RngStream loss_rng = rng.split(kStreamLoss);
    RngStream batch_rng = rng.split(kStreamBatch);

    Eigen::VectorXd global = task.initial_weight;
    const double initial_gap = task.global_loss(global) - task.optimal_loss;
    double time_acc = 0, energy_acc = 0;
    long long slot = 0;  // local-step counter across epochs, drives the learning rate

    for (int epoch = 1; epoch <= opt.max_epochs; ++epoch) {
        // block fading: fresh gains for this epoch
        Fleet round_fleet = fleet;
        if (opt.track_costs) {
            const auto gains =
                sample_channel_gains(gain_rng, cfg.fading, static_cast<int>(fleet.size()));
            round_fleet = with_gains(fleet, gains);
        }

        const auto selected =
            sample_participants(select_rng, round_fleet, opt.participants, cfg.selection);
        const RoundOutcome outcome =
            sample_losses(loss_rng, selected, cfg.loss_rate, cfg.loss_model);
        trace.retransmissions += outcome.retransmissions;
        trace.survivor_counts.push_back(static_cast<int>(outcome.survivors.size()));

        double epoch_time = 0, epoch_energy = 0;
        if (opt.track_costs) {
            const Schedule sched = make_schedule(opt.policy, epoch, selected, opt.local_epochs,
                                                 round_fleet, cfg);
            epoch_time = sched.upload.time_s + sched.compute.time_s + cfg.broadcast_time_s;
            epoch_energy = sched.upload.energy_j + sched.compute.mean_energy_j;
        }
        time_acc += epoch_time;
        energy_acc += epoch_energy;
        trace.epoch_time.push_back(epoch_time);
        trace.epoch_energy.push_back(epoch_energy);
        trace.time_cost.push_back(time_acc);
        trace.energy_cost.push_back(energy_acc);

        // local SGD on every selected slot (by-weight draws can repeat a client)
        std::vector<Eigen::VectorXd> locals(selected.size());
        for (std::size_t s = 0; s < selected.size(); ++s) {
            const int j = selected[s];
            Eigen::VectorXd w = global;
            RngStream client_rng = batch_rng.split(
                static_cast<std::uint64_t>(epoch) * 1000003ULL + s);
            const auto rows = static_cast<int>(task.data_size(j));
            const int batch = opt.full_batch
                                  ? rows
                                  : std::max(1, static_cast<int>(std::lround(
                                                    opt.minibatch_fraction * rows)));
            for (int step = 0; step < opt.local_epochs; ++step) {
                const double eta = std::min(trace.schedule.rate(slot + step + 1), rate_cap);
                if (opt.full_batch) {
                    w -= eta * task.client_gradient(j, w);
                } else {
                    w -= eta * task.client_stochastic_gradient(j, w, batch, client_rng);
                }
            }
            locals[s] = std::move(w);
        }
        slot += opt.local_epochs;

        // aggregate survivors
        std::vector<std::size_t> surviving_slots;
        {
            // match survivor ids back to slots, honoring multiplicity
            std::vector<bool> used(selected.size(), false);
            for (int id : outcome.survivors) {
                for (std::size_t s = 0; s < selected.size(); ++s) {
                    if (!used[s] && selected[s] == id) {
                        used[s] = true;
                        surviving_slots.push_back(s);
                        break;
                    }
                }
            }
        }
        const double k_gamma = static_cast<double>(surviving_slots.size());
        Eigen::VectorXd next = Eigen::VectorXd::Zero(task.dimension);
        Eigen::VectorXd agg_weights(static_cast<Eigen::Index>(surviving_slots.size()));
        std::vector<int> members;
        members.reserve(surviving_slots.size());
        if (cfg.aggregation == AggregationMode::survivor_mean) {
            for (std::size_t i = 0; i < surviving_slots.size(); ++i) {
                next += locals[surviving_slots[i]] / k_gamma;
                agg_weights[static_cast<Eigen::Index>(i)] = 1.0 / k_gamma;
                members.push_back(selected[surviving_slots[i]]);
            }
        } else {
            // scaled q-weighted sum; unbiased under uniform selection
            const double scale = static_cast<double>(task.num_clients()) / k_gamma;
            double wsum = 0;
            for (std::size_t i = 0; i < surviving_slots.size(); ++i) {
                const int j = selected[surviving_slots[i]];
                next += scale * task.weights[j] * locals[surviving_slots[i]];
                agg_weights[static_cast<Eigen::Index>(i)] = task.weights[j];
                wsum += task.weights[j];
                members.push_back(j);
            }
            agg_weights /= wsum;
        }
        global = next;

        const double gap = task.global_loss(global) - task.optimal_loss;
        trace.loss_gap.push_back(gap);
        tracker.record(epoch, diversity_at(task, members, agg_weights, global));
        trace.lambda_running.push_back(tracker.running_max());

        if (gap > 1e6 * std::max(initial_gap, 1e-12)) {
            throw NumericalError("run_training: diverged at epoch " + std::to_string(epoch) +
                                 " (loss gap " + std::to_string(gap) + ")");
        }
        if (trace.reached_epoch < 0 && gap <= opt.epsilon) {
            trace.reached_epoch = epoch;
            break;
        }
    }
    trace.lambda_raw = tracker.raw();
    trace.lambda_hat = tracker.running_max();
    return trace;
}

int measure_g_epsilon(const TrainingTrace& trace, double epsilon) {
    require(epsilon > 0, "measure_g_epsilon: epsilon must be > 0");
    for (std::size_t i = 0; i < trace.loss_gap.size(); ++i) {
        if (trace.loss_gap[i] <= epsilon) return static_cast<int>(i) + 1;
    }
    return -1;
}

std::vector<PolicyCostStats> compare_policies(const Fleet& fleet, const SystemConfig& cfg,
                                              int participants, int local_epochs,
                                              const std::vector<SchedulePolicy>& policies,
                                              int epochs_per_replicate, int replicas,
                                              RngStream rng, bool refresh_gains) {
    require(policies.size() >= 2, "compare_policies: need at least two policies");
    require(epochs_per_replicate >= 1 && replicas >= 1, "compare_policies: bad sizes");

    std::vector<std::vector<double>> replicate_means(
        policies.size(), std::vector<double>(static_cast<std::size_t>(replicas)));

    parallel_for(replicas, [&](int r) {
        RngStream rep = rng.split(static_cast<std::uint64_t>(r));
        RngStream gain_rng = rep.split(kStreamGains);
        RngStream select_rng = rep.split(kStreamSelect);
        std::vector<double> acc(policies.size(), 0.0);
        for (int epoch = 0; epoch < epochs_per_replicate; ++epoch) {
            Fleet round_fleet = fleet;
            if (refresh_gains) {
                const auto gains =
                    sample_channel_gains(gain_rng, cfg.fading, static_cast<int>(fleet.size()));
                round_fleet = with_gains(fleet, gains);
            }
            const auto selected =
                sample_participants(select_rng, round_fleet, participants, cfg.selection);
            for (std::size_t p = 0; p < policies.size(); ++p) {
                const Schedule s = make_schedule(policies[p], epoch, selected, local_epochs,
                                                 round_fleet, cfg);
                acc[p] += s.upload.combined + s.compute.combined;
            }
        }
        for (std::size_t p = 0; p < policies.size(); ++p) {
            replicate_means[p][static_cast<std::size_t>(r)] =
                acc[p] / static_cast<double>(epochs_per_replicate);
        }
    });

    std::vector<PolicyCostStats> stats(policies.size());
    for (std::size_t p = 0; p < policies.size(); ++p) {
        stats[p].policy = policies[p];
        stats[p].replicate_means = replicate_means[p];
        Welford acc;
        for (double v : replicate_means[p]) acc.add(v);
        stats[p].mean_epoch_cost = acc.mean;
        stats[p].stderr_mean = acc.stderror();
    }
    return stats;
}

} // namespace fedsched
