#pragma once

#include <vector>

#include "fedsched/convergence.hpp"

namespace fedsched {

/// Linear per-epoch cost coefficients the hyper-parameter layer consumes:
/// C_u = K*upload_unit, C_n = E_l*compute_unit, plus the fixed broadcast time.
struct UnitCosts {
    double upload_unit = 0.0;    // C_u0
    double compute_unit = 0.0;   // C_n0
    double broadcast_time = 0.0; // T_d

    void validate() const {
        require(upload_unit > 0, "costs.upload_unit must be > 0");
        require(compute_unit > 0, "costs.compute_unit must be > 0");
        require(broadcast_time >= 0, "costs.broadcast_time must be >= 0");
    }
};

/// Total expected training cost: predicted epochs times per-epoch cost,
/// (K*C_u0 + E_l*C_n0 + T_d) * G_epsilon(K, E_l, gamma). Uses the full
/// predictor, not the closed-form surrogate.
double joint_cost(const TrainingConstants& c, double epsilon, double avg_data_size,
                  double gamma, const UnitCosts& costs, double k, double local_epochs);

/// The closed-form surrogate objective behind the participation rule: the
/// local-epoch bracket is replaced by its optimized value
/// sqrt((lambda-1)f0/(8 C1 phi0)) and the prefactor is dropped, leaving
/// C_g * [sqrt((lambda-1)f0/(8 C1 phi0)) + (lambda-1)/(2D(1-gamma)K)].
double surrogate_total_cost(const TrainingConstants& c, double avg_data_size, double gamma,
                            const UnitCosts& costs, double k, double local_epochs);

struct ParticipationChoice {
    double real = 1.0;       // unconstrained stationary point of the surrogate
    int recommended = 1;     // joint_cost argmin over clamp(floor/ceil)
    bool iid_advisory = false;
    double rho0 = 0.0;       // background-training multiplier
};

/// K* = rho0 * sqrt(E_l/(D(1-gamma))) * sqrt((C_n0 + T_d/E_l)/C_u0) with
/// rho0 = (2(lambda-1) C1 phi0/f0)^(1/4). For iid data the communication term
/// is absent and K = 1 is recommended with an advisory flag. The integer
/// recommendation compares floor and ceil under the full joint cost because
/// the objective is flat near the optimum and +-1 matters at small K.
ParticipationChoice optimal_participation(const TrainingConstants& c, double epsilon,
                                          double avg_data_size, double gamma,
                                          const UnitCosts& costs, double local_epochs, int n);

struct HyperParams {
    int participants = 1;   // K
    int local_epochs = 1;   // E_l
    double rho0 = 0.0;
    bool iid_advisory = false;
};

/// Integrated rule: E_l from the local-epoch optimum, then K from the
/// participation rule evaluated at that E_l.
HyperParams optimal_hyperparams(const TrainingConstants& c, double epsilon,
                                double avg_data_size, double gamma, const UnitCosts& costs,
                                int n, int cap_el);

struct GridPoint {
    int k = 1;
    int local_epochs = 1;
    double g_epsilon = 0.0;
    double epoch_cost = 0.0;  // K*C_u0 + E_l*C_n0 + T_d
    double total = 0.0;
};

struct GridSearchResult {
    int best_k = 1;
    int best_local_epochs = 1;
    double best_total = 0.0;
    std::vector<GridPoint> surface;
};

/// Exhaustive argmin of the joint cost over an integer grid; the oracle the
/// closed forms are checked against. The full surface is kept for export.
GridSearchResult grid_search_hyperparams(const TrainingConstants& c, double epsilon,
                                         double avg_data_size, double gamma,
                                         const UnitCosts& costs, const std::vector<int>& ks,
                                         const std::vector<int>& els);

} // namespace fedsched
