#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "fedsched/types.hpp"

namespace fedsched {

/// Spectral efficiency at unit bandwidth, r0 = log2(1 + p0*h/N0) [bit/s/Hz].
/// Uploading power scales with the allocated bandwidth, so the SNR — and with
/// it r0 — does not depend on the bandwidth share.
inline double unit_rate(double unit_power, double gain, double noise_density) {
    require(unit_power > 0 && gain > 0 && noise_density > 0,
            "unit_rate: inputs must be positive");
    return std::log2(1.0 + unit_power * gain / noise_density);
}

inline double unit_rate(const Client& c, const SystemConfig& cfg) {
    return unit_rate(c.unit_power, c.channel_gain, cfg.noise_density);
}

/// Uplink rate r = a*B*r0 [bit/s] for bandwidth share a in (0,1].
inline double transmission_rate(double share, double bandwidth, double r0) {
    require(share > 0 && share <= 1.0 + 1e-12, "transmission_rate: share out of (0,1]");
    require(bandwidth > 0 && r0 > 0, "transmission_rate: inputs must be positive");
    return share * bandwidth * r0;
}

/// Time to push the model through the allocated band, t_u = z_m/(a*B*r0).
inline double upload_time(double model_bits, double share, double bandwidth, double r0) {
    require(model_bits > 0, "upload_time: model_bits must be positive");
    return model_bits / transmission_rate(share, bandwidth, r0);
}

/// Upload energy e_u = p0*z_m/r0 [J]. The bandwidth share cancels: wider band
/// means proportionally more power for proportionally less time.
inline double upload_energy(double unit_power, double model_bits, double r0) {
    require(unit_power > 0 && model_bits > 0 && r0 > 0,
            "upload_energy: inputs must be positive");
    return unit_power * model_bits / r0;
}

/// One round's uploading cost: synchronization makes the slowest client pay
/// for everyone (max over times), energies add. Ties in the max are
/// immaterial, any straggler realizes the same value.
struct UploadCost {
    double time_s = 0.0;
    double energy_j = 0.0;
    double combined = 0.0;  // time + l0 * energy
};

UploadCost round_upload_cost(const std::vector<int>& selected,
                             const std::vector<double>& shares, const Fleet& fleet,
                             const SystemConfig& cfg);

} // namespace fedsched
