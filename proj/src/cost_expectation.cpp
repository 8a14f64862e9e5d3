#include "fedsched/cost_expectation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedsched/sampling.hpp"

namespace fedsched {

namespace {

constexpr long long kEnumerationCap = 10000;

long long subset_count(int n, int k) {
    long long c = 1;
    for (int i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c > 4 * kEnumerationCap) return 4 * kEnumerationCap;  // early out, caller compares
    }
    return c;
}

long long tuple_count(int n, int k) {
    long long c = 1;
    for (int i = 0; i < k; ++i) {
        c *= n;
        if (c > 4 * kEnumerationCap) return 4 * kEnumerationCap;
    }
    return c;
}

double round_cost(const std::vector<int>& selected, int local_epochs, SchedulePolicy policy,
                  bool upload, const Fleet& fleet, const SystemConfig& cfg) {
    const Schedule s = make_schedule(policy, 0, selected, local_epochs, fleet, cfg);
    return upload ? s.upload.combined : s.compute.combined;
}

/// Walks all K-subsets (uniform) or all ordered K-tuples weighted by q
/// (by_weight) and averages the round cost exactly.
Estimate enumerate_cost(const Fleet& fleet, int k, int local_epochs, SchedulePolicy policy,
                        bool upload, const SystemConfig& cfg) {
    const int n = static_cast<int>(fleet.size());
    Estimate est;
    est.stderr_mean = 0.0;

    if (cfg.selection == SelectionMode::uniform) {
        std::vector<int> comb(static_cast<std::size_t>(k));
        std::iota(comb.begin(), comb.end(), 0);
        double sum = 0;
        long long count = 0;
        while (true) {
            sum += round_cost(comb, local_epochs, policy, upload, fleet, cfg);
            ++count;
            int i = k - 1;
            while (i >= 0 && comb[static_cast<std::size_t>(i)] == n - k + i) --i;
            if (i < 0) break;
            ++comb[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < k; ++j)
                comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
        }
        est.mean = sum / static_cast<double>(count);
        est.samples = count;
        return est;
    }

    // by_weight: odometer over ordered tuples, each with probability prod q
    std::vector<int> tuple(static_cast<std::size_t>(k), 0);
    double sum = 0;
    long long count = 0;
    while (true) {
        double prob = 1;
        for (int idx : tuple) prob *= fleet[static_cast<std::size_t>(idx)].weight;
        sum += prob * round_cost(tuple, local_epochs, policy, upload, fleet, cfg);
        ++count;
        int i = k - 1;
        while (i >= 0 && tuple[static_cast<std::size_t>(i)] == n - 1) {
            tuple[static_cast<std::size_t>(i)] = 0;
            --i;
        }
        if (i < 0) break;
        ++tuple[static_cast<std::size_t>(i)];
    }
    est.mean = sum;  // probabilities already sum to one
    est.samples = count;
    return est;
}

Estimate expected_cost(const Fleet& fleet, int k, int local_epochs, SchedulePolicy policy,
                       bool upload, const SystemConfig& cfg, RngStream rng, int replicas) {
    require(replicas >= 1, "expected cost: replicas must be >= 1");
    require(k >= 1 && k <= static_cast<int>(fleet.size()), "expected cost: K out of range");

    const int n = static_cast<int>(fleet.size());
    const bool small_space = cfg.selection == SelectionMode::uniform
                                 ? subset_count(n, k) <= kEnumerationCap
                                 : tuple_count(n, k) <= kEnumerationCap;
    if (small_space && policy != SchedulePolicy::centralized) {
        return enumerate_cost(fleet, k, local_epochs, policy, upload, cfg);
    }

    std::vector<double> values(static_cast<std::size_t>(replicas));
    parallel_for(replicas, [&](int r) {
        RngStream local = rng.split(static_cast<std::uint64_t>(r));
        const auto selected = sample_participants(local, fleet, k, cfg.selection);
        values[static_cast<std::size_t>(r)] =
            round_cost(selected, local_epochs, policy, upload, fleet, cfg);
    });
    Welford acc;
    for (double v : values) acc.add(v);
    return Estimate{acc.mean, acc.stderror(), acc.count};
}

} // namespace

Estimate expected_upload_cost(const Fleet& fleet, int k, SchedulePolicy policy,
                              const SystemConfig& cfg, RngStream rng, int replicas) {
    return expected_cost(fleet, k, 1, policy, /*upload=*/true, cfg, rng, replicas);
}

Estimate expected_compute_cost(const Fleet& fleet, int k, int local_epochs,
                               SchedulePolicy policy, const SystemConfig& cfg, RngStream rng,
                               int replicas) {
    return expected_cost(fleet, k, local_epochs, policy, /*upload=*/false, cfg, rng, replicas);
}

double unit_upload_cost(const Fleet& fleet, const SystemConfig& cfg, SchedulePolicy policy) {
    const int n = static_cast<int>(fleet.size());
    require(n >= 1, "unit_upload_cost: empty fleet");
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    const Schedule s = make_schedule(policy, 0, all, 1, fleet, cfg);
    return s.upload.combined / static_cast<double>(n);
}

double unit_compute_cost(const Fleet& fleet, const SystemConfig& cfg, SchedulePolicy policy) {
    const int n = static_cast<int>(fleet.size());
    require(n >= 1, "unit_compute_cost: empty fleet");
    std::vector<int> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    const Schedule s = make_schedule(policy, 0, all, 1, fleet, cfg);
    return s.compute.combined;
}

double unit_compute_cost_reference(const SystemConfig& cfg, double mean_chip_coeff,
                                   double avg_data_size) {
    const double fbar = reference_frequency(cfg.power_weight, mean_chip_coeff);
    const double work = cfg.cycles_per_sample * avg_data_size;
    return work / fbar + cfg.power_weight * mean_chip_coeff * fbar * fbar * work;
}

} // namespace fedsched
