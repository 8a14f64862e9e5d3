#include "fedsched/hyperopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedsched {

namespace {

double epoch_cost(const UnitCosts& costs, double k, double local_epochs) {
    return k * costs.upload_unit + local_epochs * costs.compute_unit + costs.broadcast_time;
}

} // namespace

double joint_cost(const TrainingConstants& c, double epsilon, double avg_data_size,
                  double gamma, const UnitCosts& costs, double k, double local_epochs) {
    costs.validate();
    const double g = predict_global_epochs(c, epsilon, k, local_epochs, gamma, avg_data_size);
    return g * epoch_cost(costs, k, local_epochs);
}

double surrogate_total_cost(const TrainingConstants& c, double avg_data_size, double gamma,
                            const UnitCosts& costs, double k, double local_epochs) {
    c.validate();
    costs.validate();
    require(k >= 1, "K must be >= 1");
    const double lam = c.noniid_metric;
    const double comp = std::sqrt((lam - 1.0) * c.init_gradient_ratio /
                                  (8.0 * c.stochastic_coeff * c.bound_ratio));
    const double comm = (lam - 1.0) / (2.0 * avg_data_size * (1.0 - gamma) * k);
    return epoch_cost(costs, k, local_epochs) * (comp + comm);
}

ParticipationChoice optimal_participation(const TrainingConstants& c, double epsilon,
                                          double avg_data_size, double gamma,
                                          const UnitCosts& costs, double local_epochs, int n) {
    c.validate();
    costs.validate();
    require(n >= 1, "N must be >= 1");
    require(local_epochs >= 1, "local_epochs must be >= 1");
    require(gamma >= 0 && gamma < 1, "loss_rate out of range [0,1)");

    ParticipationChoice choice;
    if (c.iid()) {
        // no communication term to pay down: every extra upload is pure cost
        choice.iid_advisory = true;
        choice.real = 1.0;
        choice.recommended = 1;
        return choice;
    }

    const double lam = c.noniid_metric;
    choice.rho0 = std::pow(
        2.0 * (lam - 1.0) * c.stochastic_coeff * c.bound_ratio / c.init_gradient_ratio, 0.25);
    const double cost_ratio =
        (costs.compute_unit + costs.broadcast_time / local_epochs) / costs.upload_unit;
    choice.real = choice.rho0 * std::sqrt(local_epochs / (avg_data_size * (1.0 - gamma))) *
                  std::sqrt(cost_ratio);

    const int lo = std::clamp(static_cast<int>(std::floor(choice.real)), 1, n);
    const int hi = std::clamp(static_cast<int>(std::ceil(choice.real)), 1, n);
    const double cost_lo = joint_cost(c, epsilon, avg_data_size, gamma, costs, lo, local_epochs);
    const double cost_hi = joint_cost(c, epsilon, avg_data_size, gamma, costs, hi, local_epochs);
    choice.recommended = cost_lo <= cost_hi ? lo : hi;
    return choice;
}

HyperParams optimal_hyperparams(const TrainingConstants& c, double epsilon,
                                double avg_data_size, double gamma, const UnitCosts& costs,
                                int n, int cap_el) {
    const LocalEpochChoice el = optimal_local_epochs(c, cap_el);
    const ParticipationChoice k = optimal_participation(c, epsilon, avg_data_size, gamma, costs,
                                                        el.rounded, n);
    HyperParams out;
    out.participants = k.recommended;
    out.local_epochs = el.rounded;
    out.rho0 = k.rho0;
    out.iid_advisory = k.iid_advisory || el.unbounded;
    return out;
}

GridSearchResult grid_search_hyperparams(const TrainingConstants& c, double epsilon,
                                         double avg_data_size, double gamma,
                                         const UnitCosts& costs, const std::vector<int>& ks,
                                         const std::vector<int>& els) {
    require(!ks.empty() && !els.empty(), "grid_search_hyperparams: empty range");
    GridSearchResult result;
    result.best_total = std::numeric_limits<double>::infinity();
    result.surface.reserve(ks.size() * els.size());
    for (int el : els) {
        for (int k : ks) {
            GridPoint p;
            p.k = k;
            p.local_epochs = el;
            p.g_epsilon = predict_global_epochs(c, epsilon, k, el, gamma, avg_data_size);
            p.epoch_cost = epoch_cost(costs, k, el);
            p.total = p.g_epsilon * p.epoch_cost;
            result.surface.push_back(p);
            if (p.total < result.best_total) {
                result.best_total = p.total;
                result.best_k = k;
                result.best_local_epochs = el;
            }
        }
    }
    return result;
}

} // namespace fedsched
