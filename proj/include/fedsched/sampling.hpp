#pragma once

#include <vector>

#include "fedsched/rng.hpp"
#include "fedsched/types.hpp"

namespace fedsched {

/// Channel gains h = large_scale * Exp(1), one per client.
std::vector<double> sample_channel_gains(RngStream& rng, const FadingModel& fading, int n);

/// Participant set of size K. uniform: K distinct indices, every K-subset
/// equiprobable. by_weight: K i.i.d. draws with probability q_j, repeats
/// allowed (the sampling scheme the convergence analysis assumes).
std::vector<int> sample_participants(RngStream& rng, const Fleet& fleet, int k,
                                     SelectionMode mode);

/// Applies package loss to a selected set. bernoulli: each upload survives
/// independently with probability 1-gamma; an all-lost pattern is resampled
/// and counted as a retransmission so the aggregation denominator is never
/// zero. worst_case: exactly ceil(K(1-gamma)) survivors, chosen uniformly.
RoundOutcome sample_losses(RngStream& rng, const std::vector<int>& selected, double gamma,
                           LossMode mode);

/// Survivor count under worst-case loss: ceil(K(1-gamma)), always >= K(1-gamma).
int worst_case_survivors(int k, double gamma);

} // namespace fedsched
