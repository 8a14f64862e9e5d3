#pragma once

#include "fedsched/rng.hpp"
#include "fedsched/scheduler.hpp"
#include "fedsched/util.hpp"

namespace fedsched {

/// Expected uploading cost per epoch, E over the random participant set of the
/// combined round cost. Exact subset enumeration when the set space is small
/// (uniform selection, C(N,K) <= 10^4, or by-weight with N^K <= 10^4); Monte
/// Carlo over split streams otherwise. Lost packages are still charged, so the
/// loss rate never enters.
Estimate expected_upload_cost(const Fleet& fleet, int k, SchedulePolicy policy,
                              const SystemConfig& cfg, RngStream rng, int replicas);

/// Expected computation cost per epoch, same expectation machinery.
Estimate expected_compute_cost(const Fleet& fleet, int k, int local_epochs,
                               SchedulePolicy policy, const SystemConfig& cfg, RngStream rng,
                               int replicas);

/// Unit uploading cost: the full-participation round cost divided by N, with
/// the shares the policy would assign to all N clients at once. The linear
/// model C_u = K * C_u0 built on it is a statistical claim, tested rather than
/// assumed.
double unit_upload_cost(const Fleet& fleet, const SystemConfig& cfg, SchedulePolicy policy);

/// Unit computation cost: full-participation straggler latency plus the fleet
/// mean energy, per local epoch.
double unit_compute_cost(const Fleet& fleet, const SystemConfig& cfg, SchedulePolicy policy);

/// Closed-form unit computation cost of an averaged fleet running at the
/// reference frequency: alpha0*D/fbar + l0*fbar^2*alpha0*kappa*D.
double unit_compute_cost_reference(const SystemConfig& cfg, double mean_chip_coeff,
                                   double avg_data_size);

} // namespace fedsched
