#include "fedsched/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fedsched {

std::vector<double> sample_channel_gains(RngStream& rng, const FadingModel& fading, int n) {
    require(n >= 1, "sample_channel_gains: n must be >= 1");
    fading.validate();
    const double scale = fading.large_scale();
    std::vector<double> gains(static_cast<std::size_t>(n));
    for (auto& g : gains) {
        double e = rng.exponential(1.0);
        if (e <= 0) e = 1e-300;  // Exp(1) draw of exactly 0 would break gain > 0
        g = scale * e;
    }
    return gains;
}

std::vector<int> sample_participants(RngStream& rng, const Fleet& fleet, int k,
                                     SelectionMode mode) {
    const int n = static_cast<int>(fleet.size());
    require(k >= 1 && k <= n, "sample_participants: K out of range [1,N]");

    std::vector<int> selected;
    selected.reserve(static_cast<std::size_t>(k));

    if (mode == SelectionMode::uniform) {
        // partial Fisher-Yates: first k entries are a uniform k-subset
        std::vector<int> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 0; i < k; ++i) {
            const auto j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - i)));
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
            selected.push_back(idx[static_cast<std::size_t>(i)]);
        }
        return selected;
    }

    // by_weight: i.i.d. categorical draws over the q_j masses
    std::vector<double> cdf(static_cast<std::size_t>(n));
    double acc = 0;
    for (int j = 0; j < n; ++j) {
        acc += fleet[static_cast<std::size_t>(j)].weight;
        cdf[static_cast<std::size_t>(j)] = acc;
    }
    require(acc > 0, "sample_participants: client weights sum to zero");
    for (int i = 0; i < k; ++i) {
        const double u = rng.uniform01() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        int j = static_cast<int>(it - cdf.begin());
        if (j >= n) j = n - 1;
        selected.push_back(j);
    }
    return selected;
}

int worst_case_survivors(int k, double gamma) {
    // ceil(k(1-gamma)) computed as k - floor(k*gamma) to dodge fp edge cases
    const int lost = static_cast<int>(std::floor(static_cast<double>(k) * gamma + 1e-9));
    return std::max(1, k - lost);
}

RoundOutcome sample_losses(RngStream& rng, const std::vector<int>& selected, double gamma,
                           LossMode mode) {
    require(gamma >= 0 && gamma < 1, "loss_rate out of range [0,1)");
    const int k = static_cast<int>(selected.size());
    require(k >= 1, "sample_losses: empty selection");

    RoundOutcome out;
    out.selected = selected;

    if (gamma == 0.0) {
        out.survivors = selected;
        return out;
    }

    if (mode == LossMode::worst_case) {
        const int keep = worst_case_survivors(k, gamma);
        std::vector<int> pos(static_cast<std::size_t>(k));
        std::iota(pos.begin(), pos.end(), 0);
        for (int i = 0; i < keep; ++i) {
            const auto j = i + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k - i)));
            std::swap(pos[static_cast<std::size_t>(i)], pos[static_cast<std::size_t>(j)]);
            out.survivors.push_back(selected[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])]);
        }
        return out;
    }

    // bernoulli per upload; resample the whole pattern if nothing got through
    while (true) {
        out.survivors.clear();
        for (int i = 0; i < k; ++i) {
            if (rng.uniform01() >= gamma) out.survivors.push_back(selected[static_cast<std::size_t>(i)]);
        }
        if (!out.survivors.empty()) break;
        ++out.retransmissions;
    }
    return out;
}

} // namespace fedsched
