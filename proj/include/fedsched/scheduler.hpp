#pragma once

#include <vector>

#include "fedsched/compute_cost.hpp"
#include "fedsched/types.hpp"
#include "fedsched/wireless_cost.hpp"

namespace fedsched {

/// Closed-form bandwidth shares: a_j proportional to sqrt(kappa_j f_j^3 / r0_j),
/// normalized onto the simplex. Clients that burn more compute energy per cycle
/// get more band (they finish uploads faster, letting them run cooler CPUs);
/// good channels need less.
std::vector<double> bandwidth_shares(const std::vector<double>& chip_coeffs,
                                     const std::vector<double>& freqs,
                                     const std::vector<double>& unit_rates);

/// Fleet reference frequency f = (1/(2*l0*kappa))^(1/3), the stationary point
/// of the per-epoch averaged compute cost. Unbounded when l0 = 0 (time-only
/// cost pushes frequency to the cap) — that case throws; policy code handles
/// it by clamping to f_max.
double reference_frequency(double power_weight, double mean_chip_coeff);

struct ClampedFreq {
    double value = 0.0;
    bool clamped = false;
};

/// Client-local frequency (D_j/D) * fbar clamped into [f_min, f_max]. Unclamped
/// clients all finish local training at the same time.
ClampedFreq local_frequency(double data_size, double avg_data_size, double ref_freq,
                            double f_min, double f_max);

/// One round's resource allocation. `finish_bound` is the max over clients of
/// upload time + compute time (clients upload as soon as they finish, so the
/// round closes when the last of those sums closes); `objective` adds the
/// l0-weighted energies to it and is what the schedulers minimize.
struct Schedule {
    int round = 0;
    int local_epochs = 1;
    std::vector<int> clients;      // fleet indices, slot order of P_t
    std::vector<double> shares;    // a_j
    std::vector<double> freqs;     // f_j
    std::vector<bool> clamped;     // f_j pinned at a box bound
    double finish_bound = 0.0;     // H
    UploadCost upload;             // separate-max uplink cost of the round
    ComputeCost compute;           // separate-max compute cost of the round
    double objective = 0.0;
    int iterations = 0;            // centralized solver sweeps (0 for closed forms)
    bool converged = true;
};

/// Combined-max objective for a candidate allocation:
/// max_j(t_u,j + t_n,j) + l0*(sum_j e_u,j + (1/K) sum_j e_n,j).
double schedule_objective(const std::vector<int>& selected, const std::vector<double>& shares,
                          const std::vector<double>& freqs, int local_epochs,
                          const Fleet& fleet, const SystemConfig& cfg);

/// Distributed policy: clients pick f_j = clamp((D_j/D) fbar) on their own from
/// the broadcast reference frequency; the server applies the closed-form share
/// rule. No per-round solver.
Schedule schedule_round(int round, const std::vector<int>& selected, int local_epochs,
                        const Fleet& fleet, const SystemConfig& cfg);

/// Evenly-allocation baseline: a_j = 1/K and f_j = fbar for everyone.
Schedule evenly_schedule(int round, const std::vector<int>& selected, int local_epochs,
                         const Fleet& fleet, const SystemConfig& cfg);

/// Central solver: substitutes the closed-form shares a(f) into the round
/// objective and minimizes the remaining function of {f_j} by projected
/// coordinate descent with golden-section line searches. Starts from the
/// distributed policy, so it never does worse than it.
Schedule centralized_schedule(int round, const std::vector<int>& selected, int local_epochs,
                              const Fleet& fleet, const SystemConfig& cfg, double tol = 1e-10,
                              int max_sweeps = 200);

Schedule make_schedule(SchedulePolicy policy, int round, const std::vector<int>& selected,
                       int local_epochs, const Fleet& fleet, const SystemConfig& cfg);

/// Dual variables of the round's allocation problem and the residuals of its
/// first-order conditions. With the canonical duals beta_j = (2 l0/K) kappa_j f_j^3,
/// the closed-form shares zero the a-stationarity exactly; stationarity_f
/// (= 1 - sum beta_j) vanishes only at an interior centralized optimum.
struct KktResiduals {
    double dual_r = 0.0;                    // multiplier of the simplex constraint
    std::vector<double> betas;              // multipliers of the finish-time constraints
    std::vector<double> stationarity_a;     // relative residual per client
    double stationarity_f = 0.0;
    double slackness = 0.0;                 // R * (sum a_j - 1)
    std::vector<double> comp_slack;         // beta_j * (H - t_u,j - t_n,j)
    std::vector<bool> boundary;             // f_j clamped

    double max_abs_stationarity_a() const;
};

KktResiduals kkt_residuals(const Schedule& sched, const Fleet& fleet, const SystemConfig& cfg);

/// Residuals for caller-supplied duals (R, {beta_j}).
KktResiduals kkt_residuals(const Schedule& sched, const Fleet& fleet, const SystemConfig& cfg,
                           double dual_r, const std::vector<double>& betas);

/// Removes clients in the bottom percentile of unit rate or data size from the
/// candidate pool and renormalizes the remaining weights. Ties survive (the
/// cut is strict), so a homogeneous fleet is never pruned.
std::vector<int> prune_candidates(const Fleet& fleet, const SystemConfig& cfg);

} // namespace fedsched
