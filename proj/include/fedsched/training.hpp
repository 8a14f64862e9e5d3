#pragma once

#include <vector>

#include "fedsched/convergence.hpp"
#include "fedsched/scheduler.hpp"
#include "fedsched/synthetic_task.hpp"

namespace fedsched {

struct SimOptions {
    int participants = 10;     // K
    int local_epochs = 20;     // E_l
    double epsilon = 1.0;      // stop when the loss gap reaches this
    int max_epochs = 150;
    double minibatch_fraction = 0.1;
    bool full_batch = false;
    SchedulePolicy policy = SchedulePolicy::distributed;
    double lr_safety = 1.0;    // multiplies the measured L*lambda in the schedule
    int lambda_burn_in = 5;
    bool track_costs = true;   // schedule every round and accumulate its cost
};

/// Per-epoch log of one training run.
struct TrainingTrace {
    std::vector<double> loss_gap;        // f(w) - f* after each global epoch
    std::vector<double> lambda_raw;      // diversity ratio samples (-1 = undefined)
    std::vector<double> lambda_running;  // running max per epoch (post burn-in)
    std::vector<int> survivor_counts;    // K_gamma per epoch
    std::vector<double> time_cost;       // cumulative, includes broadcast time
    std::vector<double> energy_cost;     // cumulative
    std::vector<double> epoch_time;      // scheduler-reported per-epoch cost terms
    std::vector<double> epoch_energy;
    double lambda_hat = 1.0;           // running max after burn-in
    double lambda_init = 1.0;          // diversity at the starting point
    int reached_epoch = -1;            // first epoch with gap <= epsilon, -1 if never
    long long retransmissions = 0;
    LearningRateSchedule schedule;
    std::uint64_t seed = 0;

    int epochs() const { return static_cast<int>(loss_gap.size()); }
};

/// Runs synchronous federated SGD on the synthetic task: each global epoch
/// selects K clients, runs E_l local steps per client, drops uploads at the
/// configured loss rate and aggregates the survivors. Per-epoch network and
/// compute costs come from the scheduling policy; channel gains are redrawn
/// each epoch (block fading). Throws NumericalError on divergence.
TrainingTrace run_training(const SyntheticTask& task, const Fleet& fleet,
                           const SystemConfig& cfg, const SimOptions& opt, RngStream rng);

/// First global epoch whose loss gap is at or below epsilon; -1 if never.
int measure_g_epsilon(const TrainingTrace& trace, double epsilon);

/// Cost comparison across scheduling policies on identical network draws
/// (same participant sets and channel gains per epoch, so the comparison is
/// paired). Training itself is not needed: round costs depend only on the
/// draws and the policy.
struct PolicyCostStats {
    SchedulePolicy policy = SchedulePolicy::distributed;
    double mean_epoch_cost = 0.0;     // mean C_u + C_n per epoch over everything
    double stderr_mean = 0.0;
    std::vector<double> replicate_means;
};

/// refresh_gains redraws channel gains every epoch; switch it off to compare
/// policies on the fleet's fixed channels (identical clients then schedule
/// identically under every policy).
std::vector<PolicyCostStats> compare_policies(const Fleet& fleet, const SystemConfig& cfg,
                                              int participants, int local_epochs,
                                              const std::vector<SchedulePolicy>& policies,
                                              int epochs_per_replicate, int replicas,
                                              RngStream rng, bool refresh_gains = true);

} // namespace fedsched
