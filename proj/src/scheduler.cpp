#include "fedsched/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace fedsched {

namespace {

std::vector<double> selected_unit_rates(const std::vector<int>& selected, const Fleet& fleet,
                                        const SystemConfig& cfg) {
    std::vector<double> rates(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
        rates[i] = unit_rate(fleet.at(static_cast<std::size_t>(selected[i])), cfg);
    }
    return rates;
}

std::vector<double> selected_chip_coeffs(const std::vector<int>& selected, const Fleet& fleet) {
    std::vector<double> kappas(selected.size());
    for (std::size_t i = 0; i < selected.size(); ++i) {
        kappas[i] = fleet.at(static_cast<std::size_t>(selected[i])).chip_coeff;
    }
    return kappas;
}

/// Fills the cost fields of a schedule whose clients/shares/freqs are set.
void attach_costs(Schedule& s, const Fleet& fleet, const SystemConfig& cfg) {
    s.upload = round_upload_cost(s.clients, s.shares, fleet, cfg);
    s.compute = round_compute_cost(s.clients, s.freqs, s.local_epochs, fleet, cfg);
    double finish = 0;
    for (std::size_t i = 0; i < s.clients.size(); ++i) {
        const Client& c = fleet.at(static_cast<std::size_t>(s.clients[i]));
        const double r0 = unit_rate(c, cfg);
        const double total =
            upload_time(cfg.model_size_bits, s.shares[i], cfg.total_bandwidth_hz, r0) +
            local_latency(s.local_epochs, c.data_size, cfg.cycles_per_sample, s.freqs[i]);
        finish = std::max(finish, total);
    }
    s.finish_bound = finish;
    s.objective = schedule_objective(s.clients, s.shares, s.freqs, s.local_epochs, fleet, cfg);
}

/// Frequencies under the distributed rule, or the f_max fallback when the
/// reference frequency is unbounded (l0 = 0).
std::vector<double> distributed_freqs(const std::vector<int>& selected, const Fleet& fleet,
                                      const SystemConfig& cfg, std::vector<bool>* clamped) {
    const double avg_data = average_data_size(fleet);
    std::vector<double> freqs(selected.size());
    if (clamped) clamped->assign(selected.size(), false);
    if (cfg.power_weight <= 0) {
        for (std::size_t i = 0; i < selected.size(); ++i) {
            freqs[i] = fleet.at(static_cast<std::size_t>(selected[i])).f_max;
            if (clamped) (*clamped)[i] = true;
        }
        return freqs;
    }
    const double fbar = reference_frequency(cfg.power_weight, average_chip_coeff(fleet));
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const Client& c = fleet.at(static_cast<std::size_t>(selected[i]));
        const ClampedFreq f = local_frequency(c.data_size, avg_data, fbar, c.f_min, c.f_max);
        freqs[i] = f.value;
        if (clamped) (*clamped)[i] = f.clamped;
    }
    return freqs;
}

double golden_section(double lo, double hi, const std::function<double(double)>& fn) {
    constexpr double inv_phi = 0.6180339887498949;
    double a = lo, b = hi;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = fn(x1), f2 = fn(x2);
    for (int it = 0; it < 90 && (b - a) > 1e-12 * (std::abs(a) + std::abs(b)); ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = fn(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = fn(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

} // namespace

std::vector<double> bandwidth_shares(const std::vector<double>& chip_coeffs,
                                     const std::vector<double>& freqs,
                                     const std::vector<double>& unit_rates) {
    const std::size_t k = chip_coeffs.size();
    require(k > 0, "bandwidth_shares: empty set");
    require(freqs.size() == k && unit_rates.size() == k, "bandwidth_shares: size mismatch");

    std::vector<double> weight(k);
    double sum = 0;
    for (std::size_t i = 0; i < k; ++i) {
        require(chip_coeffs[i] > 0 && freqs[i] > 0 && unit_rates[i] > 0,
                "bandwidth_shares: inputs must be positive");
        weight[i] = std::sqrt(chip_coeffs[i] * freqs[i] * freqs[i] * freqs[i] / unit_rates[i]);
        sum += weight[i];
    }
    for (auto& w : weight) w /= sum;
    return weight;
}

double reference_frequency(double power_weight, double mean_chip_coeff) {
    require(mean_chip_coeff > 0, "reference_frequency: chip coefficient must be positive");
    if (power_weight <= 0) {
        throw NumericalError("reference_frequency: unbounded for power_weight = 0; clamp to f_max");
    }
    return std::cbrt(1.0 / (2.0 * power_weight * mean_chip_coeff));
}

ClampedFreq local_frequency(double data_size, double avg_data_size, double ref_freq,
                            double f_min, double f_max) {
    require(data_size > 0 && avg_data_size > 0 && ref_freq > 0,
            "local_frequency: inputs must be positive");
    require(f_min > 0 && f_min <= f_max, "local_frequency: needs 0 < f_min <= f_max");
    const double raw = data_size / avg_data_size * ref_freq;
    ClampedFreq out;
    out.value = std::clamp(raw, f_min, f_max);
    out.clamped = (raw < f_min) || (raw > f_max);
    return out;
}

double schedule_objective(const std::vector<int>& selected, const std::vector<double>& shares,
                          const std::vector<double>& freqs, int local_epochs,
                          const Fleet& fleet, const SystemConfig& cfg) {
    require(!selected.empty(), "schedule_objective: empty selection");
    const double k = static_cast<double>(selected.size());
    double finish = 0, upload_energy_sum = 0, compute_energy_sum = 0;
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const Client& c = fleet.at(static_cast<std::size_t>(selected[i]));
        const double r0 = unit_rate(c, cfg);
        finish = std::max(
            finish, upload_time(cfg.model_size_bits, shares[i], cfg.total_bandwidth_hz, r0) +
                        local_latency(local_epochs, c.data_size, cfg.cycles_per_sample, freqs[i]));
        upload_energy_sum += upload_energy(c.unit_power, cfg.model_size_bits, r0);
        compute_energy_sum +=
            local_energy(local_epochs, c.chip_coeff, freqs[i], c.data_size, cfg.cycles_per_sample);
    }
    return finish + cfg.power_weight * (upload_energy_sum + compute_energy_sum / k);
}

Schedule schedule_round(int round, const std::vector<int>& selected, int local_epochs,
                        const Fleet& fleet, const SystemConfig& cfg) {
    require(!selected.empty(), "schedule_round: empty selection");
    Schedule s;
    s.round = round;
    s.local_epochs = local_epochs;
    s.clients = selected;
    s.freqs = distributed_freqs(selected, fleet, cfg, &s.clamped);
    s.shares = bandwidth_shares(selected_chip_coeffs(selected, fleet), s.freqs,
                                selected_unit_rates(selected, fleet, cfg));
    attach_costs(s, fleet, cfg);
    return s;
}

Schedule evenly_schedule(int round, const std::vector<int>& selected, int local_epochs,
                         const Fleet& fleet, const SystemConfig& cfg) {
    require(!selected.empty(), "evenly_schedule: empty selection");
    Schedule s;
    s.round = round;
    s.local_epochs = local_epochs;
    s.clients = selected;
    s.shares.assign(selected.size(), 1.0 / static_cast<double>(selected.size()));
    s.clamped.assign(selected.size(), false);
    s.freqs.resize(selected.size());
    double fbar = 0;
    const bool unbounded = cfg.power_weight <= 0;
    if (!unbounded) fbar = reference_frequency(cfg.power_weight, average_chip_coeff(fleet));
    for (std::size_t i = 0; i < selected.size(); ++i) {
        const Client& c = fleet.at(static_cast<std::size_t>(selected[i]));
        const double raw = unbounded ? c.f_max : fbar;
        s.freqs[i] = std::clamp(raw, c.f_min, c.f_max);
        s.clamped[i] = s.freqs[i] != raw || unbounded;
    }
    attach_costs(s, fleet, cfg);
    return s;
}

Schedule centralized_schedule(int round, const std::vector<int>& selected, int local_epochs,
                              const Fleet& fleet, const SystemConfig& cfg, double tol,
                              int max_sweeps) {
    require(tol > 0, "centralized_schedule: tol must be positive");
    Schedule s = schedule_round(round, selected, local_epochs, fleet, cfg);
    const std::size_t k = selected.size();
    const auto kappas = selected_chip_coeffs(selected, fleet);
    const auto rates = selected_unit_rates(selected, fleet, cfg);

    // cache everything the objective needs; only the finish time and the
    // compute terms move with f
    std::vector<double> upload_num(k), compute_num(k), energy_coeff(k);
    double upload_energy_const = 0;
    for (std::size_t j = 0; j < k; ++j) {
        const Client& c = fleet.at(static_cast<std::size_t>(selected[j]));
        upload_num[j] = cfg.model_size_bits / (cfg.total_bandwidth_hz * rates[j]);
        compute_num[j] = local_epochs * cfg.cycles_per_sample * c.data_size;
        energy_coeff[j] = cfg.power_weight / static_cast<double>(k) * local_epochs *
                          c.chip_coeff * cfg.cycles_per_sample * c.data_size;
        upload_energy_const +=
            cfg.power_weight * upload_energy(c.unit_power, cfg.model_size_bits, rates[j]);
    }

    // objective with the bandwidth split minimized out exactly: at fixed f the
    // best shares equalize per-client finish times, so the finish bound H
    // solves sum_j u_j/(H - c_j) = 1 (monotone in H, bisection). This partial
    // minimum of the convex round problem is smooth and convex in f, which is
    // what lets plain coordinate descent find the joint optimum; the closed
    // shares of the a-rule coincide with the equalizing split there.
    const auto objective_at = [&](const std::vector<double>& f) {
        double energy = upload_energy_const;
        double max_compute = 0;
        std::vector<double> compute_time(k);
        for (std::size_t j = 0; j < k; ++j) {
            compute_time[j] = compute_num[j] / f[j];
            max_compute = std::max(max_compute, compute_time[j]);
            energy += energy_coeff[j] * f[j] * f[j];
        }
        const auto share_sum_at = [&](double h) {
            double sum = 0;
            for (std::size_t j = 0; j < k; ++j) sum += upload_num[j] / (h - compute_time[j]);
            return sum;
        };
        double lo = max_compute;
        double span = 1.0;
        while (share_sum_at(lo + span) > 1.0) span *= 2;
        double hi = lo + span;
        for (int it = 0; it < 200 && (hi - lo) > 1e-15 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (share_sum_at(mid) > 1.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return 0.5 * (lo + hi) + energy;
    };

    // one descent pass: coordinate-wise golden section, then a pattern polish.
    // The finish-time max kinks the objective where clients tie and coordinate
    // moves stall there, so the polish also walks pair moves in both relative
    // directions.
    const auto descend = [&](std::vector<double> freqs, int& sweeps, bool& converged) {
        double best = objective_at(freqs);
        converged = false;
        for (sweeps = 0; sweeps < max_sweeps; ++sweeps) {
            const double before = best;
            for (std::size_t j = 0; j < k; ++j) {
                const Client& c = fleet.at(static_cast<std::size_t>(selected[j]));
                std::vector<double> trial = freqs;
                const double fj = golden_section(c.f_min, c.f_max, [&](double f) {
                    trial[j] = f;
                    return objective_at(trial);
                });
                trial[j] = fj;
                const double val = objective_at(trial);
                if (val < best) {
                    best = val;
                    freqs = trial;
                }
            }
            if (before - best <= tol * std::max(1.0, std::abs(before))) {
                converged = true;
                break;
            }
        }
        if (k > 1) {
            double step = 0.05;
            while (step > 1e-10) {
                bool improved = false;
                const auto try_move = [&](std::vector<double>& trial) {
                    for (std::size_t j = 0; j < k; ++j) {
                        const Client& c = fleet.at(static_cast<std::size_t>(selected[j]));
                        trial[j] = std::clamp(trial[j], c.f_min, c.f_max);
                    }
                    const double val = objective_at(trial);
                    if (val < best - 1e-15 * std::abs(best)) {
                        best = val;
                        freqs = trial;
                        return true;
                    }
                    return false;
                };
                for (std::size_t i = 0; i < k; ++i) {
                    for (const double dir : {1.0 + step, 1.0 - step}) {
                        std::vector<double> trial = freqs;
                        trial[i] *= dir;
                        improved |= try_move(trial);
                    }
                    for (std::size_t j = i + 1; j < k; ++j) {
                        for (const double di : {1.0 + step, 1.0 - step}) {
                            for (const double dj : {1.0 + step, 1.0 - step}) {
                                std::vector<double> trial = freqs;
                                trial[i] *= di;
                                trial[j] *= dj;
                                improved |= try_move(trial);
                            }
                        }
                    }
                }
                if (!improved) step *= 0.35;
            }
        }
        return std::make_pair(freqs, best);
    };

    int sweeps = 0;
    bool converged = false;
    const std::vector<double> freqs = descend(s.freqs, sweeps, converged).first;

    Schedule out;
    out.round = round;
    out.local_epochs = local_epochs;
    out.clients = selected;
    out.freqs = freqs;
    out.shares = bandwidth_shares(kappas, freqs, rates);
    out.clamped.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        const Client& c = fleet.at(static_cast<std::size_t>(selected[j]));
        out.clamped[j] = freqs[j] <= c.f_min * (1 + 1e-9) || freqs[j] >= c.f_max * (1 - 1e-9);
    }
    out.iterations = sweeps + 1;
    out.converged = converged;
    attach_costs(out, fleet, cfg);
    // descent started from the distributed point, so this cannot regress
    if (out.objective > s.objective) return s;
    return out;
}

Schedule make_schedule(SchedulePolicy policy, int round, const std::vector<int>& selected,
                       int local_epochs, const Fleet& fleet, const SystemConfig& cfg) {
    switch (policy) {
        case SchedulePolicy::distributed:
            return schedule_round(round, selected, local_epochs, fleet, cfg);
        case SchedulePolicy::centralized:
            return centralized_schedule(round, selected, local_epochs, fleet, cfg);
        case SchedulePolicy::even:
            return evenly_schedule(round, selected, local_epochs, fleet, cfg);
    }
    throw ConfigError("make_schedule: unknown policy");
}

double KktResiduals::max_abs_stationarity_a() const {
    double m = 0;
    for (double r : stationarity_a) m = std::max(m, std::abs(r));
    return m;
}

KktResiduals kkt_residuals(const Schedule& sched, const Fleet& fleet, const SystemConfig& cfg) {
    const double k = static_cast<double>(sched.clients.size());
    std::vector<double> betas(sched.clients.size());
    double dual_r = 0;
    for (std::size_t j = 0; j < sched.clients.size(); ++j) {
        const Client& c = fleet.at(static_cast<std::size_t>(sched.clients[j]));
        betas[j] = 2.0 * cfg.power_weight / k * c.chip_coeff * sched.freqs[j] * sched.freqs[j] *
                   sched.freqs[j];
    }
    // R that makes the closed-form shares stationary: (sum_l sqrt(beta_l z_m/(B r_l0)))^2
    double root_sum = 0;
    for (std::size_t j = 0; j < sched.clients.size(); ++j) {
        const Client& c = fleet.at(static_cast<std::size_t>(sched.clients[j]));
        root_sum += std::sqrt(betas[j] * cfg.model_size_bits /
                              (cfg.total_bandwidth_hz * unit_rate(c, cfg)));
    }
    dual_r = root_sum * root_sum;
    return kkt_residuals(sched, fleet, cfg, dual_r, betas);
}

KktResiduals kkt_residuals(const Schedule& sched, const Fleet& fleet, const SystemConfig& cfg,
                           double dual_r, const std::vector<double>& betas) {
    require(betas.size() == sched.clients.size(), "kkt_residuals: duals/selection mismatch");
    KktResiduals res;
    res.dual_r = dual_r;
    res.betas = betas;
    res.stationarity_a.resize(sched.clients.size());
    res.comp_slack.resize(sched.clients.size());
    res.boundary = sched.clamped;

    const double scale = std::abs(dual_r) > 0 ? std::abs(dual_r) : 1.0;
    double beta_sum = 0, share_sum = 0;
    for (std::size_t j = 0; j < sched.clients.size(); ++j) {
        const Client& c = fleet.at(static_cast<std::size_t>(sched.clients[j]));
        const double r0 = unit_rate(c, cfg);
        const double grad_a = dual_r - betas[j] * cfg.model_size_bits /
                                           (cfg.total_bandwidth_hz * r0 * sched.shares[j] *
                                            sched.shares[j]);
        res.stationarity_a[j] = grad_a / scale;
        const double total_time =
            upload_time(cfg.model_size_bits, sched.shares[j], cfg.total_bandwidth_hz, r0) +
            local_latency(sched.local_epochs, c.data_size, cfg.cycles_per_sample,
                          sched.freqs[j]);
        res.comp_slack[j] = betas[j] * (sched.finish_bound - total_time);
        beta_sum += betas[j];
        share_sum += sched.shares[j];
    }
    res.stationarity_f = 1.0 - beta_sum;
    res.slackness = dual_r * (share_sum - 1.0);
    return res;
}

std::vector<int> prune_candidates(const Fleet& fleet, const SystemConfig& cfg) {
    std::vector<int> keep(fleet.size());
    std::iota(keep.begin(), keep.end(), 0);
    if (!cfg.prune.enabled || fleet.size() < 2) return keep;

    const auto percentile_value = [](std::vector<double> v, double p) {
        std::sort(v.begin(), v.end());
        const auto idx = static_cast<std::size_t>(p * static_cast<double>(v.size()));
        return v[std::min(idx, v.size() - 1)];
    };

    std::vector<double> rates(fleet.size()), sizes(fleet.size());
    for (std::size_t j = 0; j < fleet.size(); ++j) {
        rates[j] = unit_rate(fleet[j], cfg);
        sizes[j] = fleet[j].data_size;
    }
    const double rate_floor = percentile_value(rates, cfg.prune.rate_percentile);
    const double size_floor = percentile_value(sizes, cfg.prune.data_percentile);

    std::vector<int> out;
    for (std::size_t j = 0; j < fleet.size(); ++j) {
        if (rates[j] < rate_floor || sizes[j] < size_floor) continue;
        out.push_back(static_cast<int>(j));
    }
    // never empty the pool
    return out.empty() ? keep : out;
}

} // namespace fedsched
