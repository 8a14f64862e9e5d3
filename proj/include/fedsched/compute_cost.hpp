#pragma once

#include <vector>

#include "fedsched/types.hpp"

namespace fedsched {

/// Local training latency t_n = E_l * alpha0 * D_j / f_j.
inline double local_latency(int local_epochs, double data_size, double cycles_per_sample,
                            double freq) {
    require(local_epochs >= 1, "local_latency: local_epochs must be >= 1");
    require(data_size > 0 && cycles_per_sample > 0, "local_latency: inputs must be positive");
    require(freq > 0, "local_latency: frequency must be positive");
    return static_cast<double>(local_epochs) * cycles_per_sample * data_size / freq;
}

/// Local training energy e_n = E_l * kappa * f^2 * alpha0 * D_j.
/// Cubic trade-off against latency: e_n = kappa * f^3 * t_n.
inline double local_energy(int local_epochs, double chip_coeff, double freq, double data_size,
                           double cycles_per_sample) {
    require(local_epochs >= 1, "local_energy: local_epochs must be >= 1");
    require(chip_coeff > 0 && freq > 0 && data_size > 0 && cycles_per_sample > 0,
            "local_energy: inputs must be positive");
    return static_cast<double>(local_epochs) * chip_coeff * freq * freq * cycles_per_sample *
           data_size;
}

/// One round's computation cost: straggler latency (max) plus the fleet-mean
/// energy, weighted by l0.
struct ComputeCost {
    double time_s = 0.0;
    double mean_energy_j = 0.0;
    double combined = 0.0;  // time + l0 * mean_energy
};

ComputeCost round_compute_cost(const std::vector<int>& selected,
                               const std::vector<double>& freqs, int local_epochs,
                               const Fleet& fleet, const SystemConfig& cfg);

} // namespace fedsched
