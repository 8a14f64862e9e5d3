#include "fedsched/synthetic_task.hpp"

#include <cmath>

namespace fedsched {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

/// Feature scales spread over the coordinates so the Hessian has a real
/// spectrum to measure (condition number about 1 + 2.5/ridge).
Eigen::VectorXd feature_scales(int dim) {
    Eigen::VectorXd s(dim);
    for (int i = 0; i < dim; ++i) {
        s[i] = std::sqrt(0.5 + 2.5 * static_cast<double>(i) / std::max(1, dim - 1));
    }
    return s;
}

} // namespace

double SyntheticTask::avg_data_size() const {
    double sum = 0;
    for (const auto& d : data) sum += static_cast<double>(d.x.rows());
    return sum / static_cast<double>(data.size());
}

double SyntheticTask::client_loss(int j, const Eigen::VectorXd& w) const {
    const ClientData& d = data[static_cast<std::size_t>(j)];
    const double n = static_cast<double>(d.x.rows());
    if (family == LossFamily::quadratic) {
        return 0.5 * (d.x * w - d.y).squaredNorm() / n + 0.5 * ridge * w.squaredNorm();
    }
    const Eigen::VectorXd margins = (d.x * w).cwiseProduct(d.y);
    double loss = 0;
    for (Eigen::Index i = 0; i < margins.size(); ++i) {
        // log(1+exp(-m)) computed stably
        const double m = margins[i];
        loss += m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    }
    return loss / n + 0.5 * ridge * w.squaredNorm();
}

double SyntheticTask::global_loss(const Eigen::VectorXd& w) const {
    double loss = 0;
    for (int j = 0; j < num_clients(); ++j) loss += weights[j] * client_loss(j, w);
    return loss;
}

Eigen::VectorXd SyntheticTask::client_gradient(int j, const Eigen::VectorXd& w) const {
    const ClientData& d = data[static_cast<std::size_t>(j)];
    const double n = static_cast<double>(d.x.rows());
    if (family == LossFamily::quadratic) {
        return d.x.transpose() * (d.x * w - d.y) / n + ridge * w;
    }
    Eigen::VectorXd grad = ridge * w;
    for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
        const double m = d.y[i] * d.x.row(i).dot(w);
        grad -= d.y[i] * sigmoid(-m) / n * d.x.row(i).transpose();
    }
    return grad;
}

Eigen::VectorXd SyntheticTask::client_stochastic_gradient(int j, const Eigen::VectorXd& w,
                                                          int batch, RngStream& rng) const {
    const ClientData& d = data[static_cast<std::size_t>(j)];
    const auto n = static_cast<std::uint64_t>(d.x.rows());
    require(batch >= 1, "stochastic gradient: batch must be >= 1");
    Eigen::VectorXd grad = ridge * w;
    for (int b = 0; b < batch; ++b) {
        const auto i = static_cast<Eigen::Index>(rng.uniform_int(n));
        if (family == LossFamily::quadratic) {
            const double r = d.x.row(i).dot(w) - d.y[i];
            grad += r / static_cast<double>(batch) * d.x.row(i).transpose();
        } else {
            const double m = d.y[i] * d.x.row(i).dot(w);
            grad -= d.y[i] * sigmoid(-m) / static_cast<double>(batch) * d.x.row(i).transpose();
        }
    }
    return grad;
}

SyntheticTask make_synthetic_task(const TaskSpec& spec, RngStream rng) {
    require(spec.num_clients >= 2, "make_synthetic_task: need at least 2 clients");
    require(spec.dimension >= 1, "make_synthetic_task: dimension must be >= 1");
    require(spec.ridge > 0, "make_synthetic_task: ridge must be > 0");
    require(spec.skew >= 0, "make_synthetic_task: skew must be >= 0");

    SyntheticTask task;
    task.family = spec.family;
    task.ridge = spec.ridge;
    task.dimension = spec.dimension;
    task.skew = spec.skew;

    std::vector<double> sizes = spec.data_sizes;
    if (sizes.empty()) sizes.assign(static_cast<std::size_t>(spec.num_clients), spec.mean_data_size);
    require(static_cast<int>(sizes.size()) == spec.num_clients,
            "make_synthetic_task: data_sizes/num_clients mismatch");
    for (double s : sizes) require(s >= 10, "make_synthetic_task: D_j must be >= 10");

    const Eigen::VectorXd scales = feature_scales(spec.dimension);
    RngStream gen = rng.split(101);

    // common ground truth plus a per-client shift of magnitude skew
    Eigen::VectorXd base(spec.dimension);
    for (int i = 0; i < spec.dimension; ++i) base[i] = gen.normal();

    task.data.resize(static_cast<std::size_t>(spec.num_clients));
    task.weights.resize(spec.num_clients);
    double total = 0;
    for (double s : sizes) total += s;

    for (int j = 0; j < spec.num_clients; ++j) {
        RngStream local = rng.split(200 + static_cast<std::uint64_t>(j));
        Eigen::VectorXd shift(spec.dimension);
        for (int i = 0; i < spec.dimension; ++i) shift[i] = local.normal();
        shift.normalize();
        const Eigen::VectorXd truth = base + spec.skew * std::sqrt(static_cast<double>(spec.dimension)) * shift;

        const auto rows = static_cast<Eigen::Index>(sizes[static_cast<std::size_t>(j)]);
        ClientData d;
        d.x.resize(rows, spec.dimension);
        d.y.resize(rows);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (int col = 0; col < spec.dimension; ++col) {
                d.x(i, col) = scales[col] * local.normal();
            }
            const double clean = d.x.row(i).dot(truth);
            if (spec.family == LossFamily::quadratic) {
                d.y[i] = clean + spec.label_noise * local.normal();
            } else {
                const double noisy = clean + spec.label_noise * local.normal();
                d.y[i] = noisy >= 0 ? 1.0 : -1.0;
            }
        }
        task.data[static_cast<std::size_t>(j)] = std::move(d);
        task.weights[j] = sizes[static_cast<std::size_t>(j)] / total;
    }

    task.initial_weight = Eigen::VectorXd::Zero(spec.dimension);

    // regularity constants and the exact optimum
    if (spec.family == LossFamily::quadratic) {
        Eigen::MatrixXd hessian = Eigen::MatrixXd::Zero(spec.dimension, spec.dimension);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(spec.dimension);
        for (int j = 0; j < spec.num_clients; ++j) {
            const ClientData& d = task.data[static_cast<std::size_t>(j)];
            const double n = static_cast<double>(d.x.rows());
            hessian += task.weights[j] * (d.x.transpose() * d.x) / n;
            rhs += task.weights[j] * d.x.transpose() * d.y / n;
        }
        hessian += spec.ridge * Eigen::MatrixXd::Identity(spec.dimension, spec.dimension);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian);
        task.pl_constant = eig.eigenvalues().minCoeff();
        task.smoothness = eig.eigenvalues().maxCoeff();
        task.minimizer = hessian.ldlt().solve(rhs);
        task.optimal_loss = task.global_loss(task.minimizer);
        return task;
    }

    // logistic: L from the curvature bound, mu from the ridge, optimum by
    // long-run centralized gradient descent
    Eigen::MatrixXd second_moment = Eigen::MatrixXd::Zero(spec.dimension, spec.dimension);
    for (int j = 0; j < spec.num_clients; ++j) {
        const ClientData& d = task.data[static_cast<std::size_t>(j)];
        const double n = static_cast<double>(d.x.rows());
        second_moment += task.weights[j] * (d.x.transpose() * d.x) / n;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(second_moment);
    task.smoothness = 0.25 * eig.eigenvalues().maxCoeff() + spec.ridge;
    task.pl_constant = spec.ridge;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(spec.dimension);
    const double step = 1.0 / task.smoothness;
    for (int it = 0; it < 200000; ++it) {
        Eigen::VectorXd grad = Eigen::VectorXd::Zero(spec.dimension);
        for (int j = 0; j < spec.num_clients; ++j) {
            grad += task.weights[j] * task.client_gradient(j, w);
        }
        w -= step * grad;
        if (grad.norm() < 1e-12) break;
    }
    task.minimizer = w;
    task.optimal_loss = task.global_loss(w);
    return task;
}

} // namespace fedsched
