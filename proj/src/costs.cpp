#include "fedsched/compute_cost.hpp"
#include "fedsched/wireless_cost.hpp"

namespace fedsched {

UploadCost round_upload_cost(const std::vector<int>& selected,
                             const std::vector<double>& shares, const Fleet& fleet,
                             const SystemConfig& cfg) {
    require(!selected.empty(), "round_upload_cost: empty selection");
    require(shares.size() == selected.size(), "round_upload_cost: shares/selection mismatch");

    double share_sum = 0;
    for (double a : shares) {
        require(a > 0, "round_upload_cost: shares must be positive");
        share_sum += a;
    }
    require(share_sum <= 1.0 + 1e-9, "round_upload_cost: shares exceed the band");

    UploadCost cost;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const Client& c = fleet.at(static_cast<std::size_t>(selected[i]));
        const double r0 = unit_rate(c, cfg);
        cost.time_s = std::max(
            cost.time_s, upload_time(cfg.model_size_bits, shares[i], cfg.total_bandwidth_hz, r0));
        cost.energy_j += upload_energy(c.unit_power, cfg.model_size_bits, r0);
    }
    cost.combined = cost.time_s + cfg.power_weight * cost.energy_j;
    return cost;
}

ComputeCost round_compute_cost(const std::vector<int>& selected,
                               const std::vector<double>& freqs, int local_epochs,
                               const Fleet& fleet, const SystemConfig& cfg) {
    require(!selected.empty(), "round_compute_cost: empty selection");
    require(freqs.size() == selected.size(), "round_compute_cost: freqs/selection mismatch");

    ComputeCost cost;
    double energy_sum = 0;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const Client& c = fleet.at(static_cast<std::size_t>(selected[i]));
        require(freqs[i] >= c.f_min * (1 - 1e-9) && freqs[i] <= c.f_max * (1 + 1e-9),
                "round_compute_cost: frequency out of bounds for client " +
                    std::to_string(c.id));
        cost.time_s = std::max(cost.time_s, local_latency(local_epochs, c.data_size,
                                                          cfg.cycles_per_sample, freqs[i]));
        energy_sum += local_energy(local_epochs, c.chip_coeff, freqs[i], c.data_size,
                                   cfg.cycles_per_sample);
    }
    cost.mean_energy_j = energy_sum / static_cast<double>(selected.size());
    cost.combined = cost.time_s + cfg.power_weight * cost.mean_energy_j;
    return cost;
}

} // namespace fedsched
