#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "fedsched/rng.hpp"
#include "fedsched/types.hpp"

namespace fedsched {

enum class LossFamily { quadratic, logistic };

/// One client's local data set.
struct ClientData {
    Eigen::MatrixXd x;  // rows = samples
    Eigen::VectorXd y;
};

struct TaskSpec {
    int num_clients = 50;
    std::vector<double> data_sizes;  // D_j per client; constant fallback below
    double mean_data_size = 500.0;
    double skew = 0.0;               // 0 = identical client distributions
    int dimension = 10;
    LossFamily family = LossFamily::quadratic;
    double ridge = 1.0;
    double label_noise = 0.5;
};

/// Synthetic federated objective with known regularity. Client j holds D_j
/// samples from a distribution whose ground-truth parameter is shifted by
/// skew in a per-client direction; the global loss is the q-weighted mean of
/// the local losses. Quadratic tasks expose exact smoothness, PL constant,
/// minimizer and optimal loss from the Hessian; logistic tasks carry bounds
/// and a numerically solved optimum.
struct SyntheticTask {
    LossFamily family = LossFamily::quadratic;
    double ridge = 1.0;
    int dimension = 10;
    double skew = 0.0;
    std::vector<ClientData> data;
    Eigen::VectorXd weights;        // q_j, sums to 1
    Eigen::VectorXd initial_weight; // w0
    Eigen::VectorXd minimizer;      // w*
    double optimal_loss = 0.0;      // f(w*)
    double smoothness = 0.0;        // L
    double pl_constant = 0.0;       // mu

    int num_clients() const { return static_cast<int>(data.size()); }
    double data_size(int j) const { return static_cast<double>(data[static_cast<std::size_t>(j)].x.rows()); }
    double avg_data_size() const;

    double client_loss(int j, const Eigen::VectorXd& w) const;
    double global_loss(const Eigen::VectorXd& w) const;
    Eigen::VectorXd client_gradient(int j, const Eigen::VectorXd& w) const;
    /// Mini-batch stochastic gradient, batch drawn with replacement.
    Eigen::VectorXd client_stochastic_gradient(int j, const Eigen::VectorXd& w, int batch,
                                               RngStream& rng) const;
};

SyntheticTask make_synthetic_task(const TaskSpec& spec, RngStream rng);

} // namespace fedsched
