#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fedsched/errors.hpp"

namespace fedsched {

/// How the participant set P_t is drawn each global epoch.
enum class SelectionMode { uniform, by_weight };

/// How uplink package loss is realized.
enum class LossMode { bernoulli, worst_case };

/// How surviving local models are averaged into the global model.
///   scaled_weight_sum : w = (N/K_g) * sum q_j w_j  (pairs with uniform selection)
///   survivor_mean     : w = (1/K_g) * sum w_j      (pairs with by_weight selection)
enum class AggregationMode { scaled_weight_sum, survivor_mean };

/// How per-round bandwidth shares and CPU frequencies are chosen.
enum class SchedulePolicy { distributed, centralized, even };

/// Large-scale path loss with unit-mean exponential small-scale fading:
/// h = base_gain * (ref_distance/distance)^path_exponent * Exp(1).
struct FadingModel {
    double base_gain = 1e-4;
    double path_exponent = 4.0;
    double ref_distance = 1.0;
    double distance = 200.0;

    double large_scale() const {
        return base_gain * std::pow(ref_distance / distance, path_exponent);
    }

    void validate() const {
        require(base_gain > 0, "fading.base_gain must be > 0");
        require(ref_distance > 0, "fading.ref_distance must be > 0");
        require(distance > 0, "fading.distance must be > 0");
        require(path_exponent >= 0, "fading.path_exponent must be >= 0");
    }
};

/// Candidate pruning ahead of participant selection: clients in the bottom
/// percentile of unit rate or of data size are removed from the pool.
struct PruneConfig {
    bool enabled = false;
    double rate_percentile = 0.05;
    double data_percentile = 0.05;
};

/// Network-wide constants shared by every round.
struct SystemConfig {
    double total_bandwidth_hz = 20e6;   // B
    double noise_density = 5e-20;       // W/Hz
    double model_size_bits = 3e4;       // uploaded model size
    double cycles_per_sample = 5e5;     // processing cycles per data sample
    double power_weight = 1.0;          // weight of energy in the combined cost
    double broadcast_time_s = 0.0;      // fixed downlink time per epoch
    double loss_rate = 0.0;             // package loss rate, in [0,1)
    int num_clients = 50;
    FadingModel fading;
    SelectionMode selection = SelectionMode::by_weight;
    LossMode loss_model = LossMode::worst_case;
    AggregationMode aggregation = AggregationMode::survivor_mean;
    PruneConfig prune;

    void validate() const {
        require(total_bandwidth_hz > 0, "system.total_bandwidth_hz must be > 0");
        require(noise_density > 0, "system.noise_density must be > 0");
        require(model_size_bits > 0, "system.model_size_bits must be > 0");
        require(cycles_per_sample > 0, "system.cycles_per_sample must be > 0");
        require(power_weight >= 0, "system.power_weight must be >= 0");
        require(broadcast_time_s >= 0, "system.broadcast_time_s must be >= 0");
        require(loss_rate >= 0 && loss_rate < 1, "loss_rate out of range [0,1)");
        require(num_clients >= 1, "system.num_clients must be >= 1");
        require(prune.rate_percentile >= 0 && prune.rate_percentile < 1,
                "prune.rate_percentile out of range [0,1)");
        require(prune.data_percentile >= 0 && prune.data_percentile < 1,
                "prune.data_percentile out of range [0,1)");
        fading.validate();
    }
};

/// Per-client state. Values are immutable once constructed; channel gains are
/// redrawn per epoch by producing an updated fleet (see with_gains).
struct Client {
    int id = 0;
    double data_size = 500.0;     // D_j, samples
    double weight = 0.0;          // q_j, probability mass (normalized fleet-wide)
    double chip_coeff = 5e-27;    // energy coefficient of the processor
    double unit_power = 4e-7;     // uploading power per Hz, W/Hz
    double channel_gain = 1.0;    // h_j, dimensionless power gain
    double f_min = 1e8;           // cycles/s
    double f_max = 2e9;

    void validate() const {
        const std::string tag = "client " + std::to_string(id) + ": ";
        require(data_size >= 1, tag + "data_size must be >= 1");
        require(chip_coeff > 0, tag + "chip_coeff must be > 0");
        require(unit_power > 0, tag + "unit_power must be > 0");
        require(channel_gain > 0, tag + "channel_gain must be > 0");
        require(f_min > 0 && f_min <= f_max, tag + "needs 0 < f_min <= f_max");
    }
};

using Fleet = std::vector<Client>;

inline double average_data_size(const Fleet& fleet) {
    require(!fleet.empty(), "fleet is empty");
    double sum = 0;
    for (const auto& c : fleet) sum += c.data_size;
    return sum / static_cast<double>(fleet.size());
}

inline double average_chip_coeff(const Fleet& fleet) {
    require(!fleet.empty(), "fleet is empty");
    double sum = 0;
    for (const auto& c : fleet) sum += c.chip_coeff;
    return sum / static_cast<double>(fleet.size());
}

/// l_j = D / D_j, the inverse relative data size.
inline double latency_ratio(const Client& c, double avg_data_size) {
    return avg_data_size / c.data_size;
}

/// Copy of the fleet with fresh channel gains (block fading per epoch).
inline Fleet with_gains(const Fleet& fleet, const std::vector<double>& gains) {
    require(gains.size() == fleet.size(), "with_gains: size mismatch");
    Fleet out = fleet;
    for (std::size_t i = 0; i < out.size(); ++i) out[i].channel_gain = gains[i];
    return out;
}

/// Outcome of one round of selection plus package loss.
struct RoundOutcome {
    std::vector<int> selected;    // P_t as fleet indices; repeats possible under by_weight
    std::vector<int> survivors;   // P_{t,gamma}, the uploads actually received
    int retransmissions = 0;      // rounds where a bernoulli pattern lost everything
};

} // namespace fedsched
