#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "fedsched/errors.hpp"

namespace fedsched {

/// Constants of the convergence model. All positive; noniid_metric >= 1 with
/// equality exactly in the i.i.d. case; bound_ratio >= 1 by construction.
struct TrainingConstants {
    double smoothness = 4.0;            // L
    double pl_constant = 1.0;           // mu, with mu <= L
    double gradient_bound_sq = 1.0;     // G^2
    double stochastic_coeff = 1.0;      // C1, variance scaling with gradient norm
    double sampling_noise_sq = 1.0;     // sigma^2, variance floor of data sampling
    double bound_ratio = 2.0;           // phi0 = G^2 / sup C1 ||aggregate gradient||^2
    double init_gradient_ratio = 2.0;   // f0, with ||grad f(w0)||^2 <= f0 G^2
    double noniid_metric = 2.0;         // lambda
    double initial_gap = 1.0;           // f(w0) - f*

    void validate() const {
        require(smoothness > 0, "constants.smoothness must be > 0");
        require(pl_constant > 0, "constants.pl_constant must be > 0");
        require(pl_constant <= smoothness * (1 + 1e-12),
                "constants.pl_constant must not exceed smoothness");
        require(gradient_bound_sq > 0, "constants.gradient_bound_sq must be > 0");
        require(stochastic_coeff > 0, "constants.stochastic_coeff must be > 0");
        require(sampling_noise_sq >= 0, "constants.sampling_noise_sq must be >= 0");
        require(bound_ratio >= 1, "constants.bound_ratio must be >= 1");
        require(init_gradient_ratio > 0, "constants.init_gradient_ratio must be > 0");
        require(noniid_metric >= 1, "constants.noniid_metric must be >= 1");
        require(initial_gap > 0, "constants.initial_gap must be > 0");
    }

    bool iid() const { return noniid_metric <= 1.0 + 1e-12; }
};

/// Instantaneous gradient-diversity ratio: sum_j pi_j ||g_j||^2 over
/// ||sum_j pi_j g_j||^2. Always >= 1; equals 1 when clients agree. Returns
/// nullopt when the aggregate gradient vanishes (the ratio is undefined and
/// the sample must be skipped).
std::optional<double> noniid_ratio(const Eigen::MatrixXd& gradients,
                                   const Eigen::VectorXd& weights);

/// Running max of the diversity ratio, ignoring an initial burn-in where
/// gradients are dominated by the starting point.
class NoniidTracker {
public:
    explicit NoniidTracker(int burn_in_epochs = 5) : burn_in_(burn_in_epochs) {}

    void record(int epoch, std::optional<double> ratio) {
        raw_.push_back(ratio.value_or(-1.0));
        if (ratio && epoch > burn_in_ && *ratio > max_) max_ = *ratio;
    }

    /// >= 1 always; 1 when nothing beyond burn-in has been seen.
    double running_max() const { return max_; }
    const std::vector<double>& raw() const { return raw_; }  // -1 marks skipped samples

private:
    int burn_in_;
    double max_ = 1.0;
    std::vector<double> raw_;
};

/// Predicted number of global epochs to reach loss gap epsilon:
///   (1/eps) * (4 L^2 G^2 lambda / mu^2) *
///   [ (lambda-1)/(K(1-gamma)) * 1/(2D) + (lambda-1)E_l/(2 C1 phi0) + f0/(4 E_l) ].
/// K and E_l are real-valued here; callers round as they see fit. Decreasing
/// and convex in K for non-i.i.d. data; flat in K, gamma and D when iid.
double predict_global_epochs(const TrainingConstants& c, double epsilon, double k,
                             double local_epochs, double gamma, double avg_data_size);

/// The bracket above without the communication term; local-epoch trade-off
/// g(E_l) = (lambda-1)E_l/(2 C1 phi0) + f0/(4 E_l).
double local_epoch_bracket(const TrainingConstants& c, double local_epochs);

struct LocalEpochChoice {
    double real = 0.0;      // unconstrained stationary point
    int rounded = 1;        // better of floor/ceil under the bracket
    bool unbounded = false; // iid case: bracket decreases forever, capped
};

/// E_l* = sqrt(C1 phi0 f0 / (2(lambda-1))). For iid data the bracket has no
/// interior minimum; the choice is then capped at cap_el and flagged.
LocalEpochChoice optimal_local_epochs(const TrainingConstants& c, int cap_el = 0);

/// Diminishing step size eta_t = v/(t+beta)^alpha. The convergence induction
/// only goes through for alpha <= 1 and mu*v >= 1; validate() enforces both.
struct LearningRateSchedule {
    double v = 1.0;
    double beta = 0.0;
    double alpha = 1.0;

    double rate(long long t) const { return v / std::pow(static_cast<double>(t) + beta, alpha); }

    void validate(double pl_constant) const {
        require(alpha <= 1.0, "schedule.alpha must be <= 1 (induction fails otherwise)");
        require(pl_constant * v >= 1.0 - 1e-12, "schedule needs mu*v >= 1");
        require(v > 0 && beta >= 0, "schedule needs v > 0 and beta >= 0");
    }

    /// v = 2/mu, beta+1 = 2*L*lambda, alpha = 1.
    static LearningRateSchedule theory_default(double smoothness, double pl_constant,
                                               double lambda) {
        return LearningRateSchedule{2.0 / pl_constant, 2.0 * smoothness * lambda - 1.0, 1.0};
    }
};

/// The recursion bundle behind the 1/t bound: per-step drift aggregate M and
/// induction constant X = max{v^2 M/(mu v - 1), (beta+1)^alpha * Delta_1}.
struct LossBoundModel {
    TrainingConstants constants;
    LearningRateSchedule schedule;
    double k = 1.0;
    double local_epochs = 1.0;
    double gamma = 0.0;
    double avg_data_size = 1.0;

    void validate() const;
    double drift_aggregate() const;     // M, includes the small noise term
    double induction_constant() const;  // X
    /// Bound via the induction form, Delta_t <= X/(t+beta)^alpha.
    double induction_bound(long long t) const;
};

/// Loss-gap bound at local step t (the published 1/t curve):
///   (1/t) * (4 E_l L^2 G^2 lambda / mu^2) * [same bracket as the predictor].
/// By construction the curve crosses epsilon exactly at t = E_l * G_epsilon.
double loss_bound_at(const TrainingConstants& c, double k, double local_epochs, double gamma,
                     double avg_data_size, double t);

std::vector<double> loss_bound_curve(const LossBoundModel& model, long long t_max);

/// The term dropped from the published bound, (1/t)(4 E_l L^2 G^2 lambda/mu^2)
/// * 1/(2 L K D (1-gamma) E_l); reported so its smallness can be audited.
double loss_bound_dropped_term(const TrainingConstants& c, double k, double local_epochs,
                               double gamma, double avg_data_size, double t);

/// One measured operating point for the predictor fit.
struct GepsSample {
    double k = 1.0;
    double local_epochs = 1.0;
    double gamma = 0.0;
    double avg_data_size = 1.0;
    double g_epsilon = 0.0;
};

/// Nonnegative least-squares fit of the predictor's three-term structure
///   G = comm/(K(1-gamma)D) + drift*E_l + init/E_l.
/// The individual constants are not identifiable from G data; only these
/// composite coefficients are.
struct GepsFit {
    double comm_coeff = 0.0;   // A*(lambda-1)/2
    double drift_coeff = 0.0;  // A*(lambda-1)/(2 C1 phi0)
    double init_coeff = 0.0;   // A*f0/4
    double r_squared = 0.0;
    Eigen::VectorXd residuals;

    double predict(const GepsSample& s) const {
        return comm_coeff / (s.k * (1.0 - s.gamma) * s.avg_data_size) +
               drift_coeff * s.local_epochs + init_coeff / s.local_epochs;
    }
};

GepsFit fit_g_epsilon(const std::vector<GepsSample>& samples);

/// Lawson-Hanson nonnegative least squares, min ||Ax-b|| s.t. x >= 0.
Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b);

} // namespace fedsched
