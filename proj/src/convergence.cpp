#include "fedsched/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace fedsched {

std::optional<double> noniid_ratio(const Eigen::MatrixXd& gradients,
                                   const Eigen::VectorXd& weights) {
    require(gradients.rows() == weights.size(), "noniid_ratio: weights/gradients mismatch");
    require(gradients.rows() >= 1, "noniid_ratio: no gradients");
    require(std::abs(weights.sum() - 1.0) <= 1e-9, "noniid_ratio: weights must sum to 1");

    double weighted_sq = 0;
    Eigen::VectorXd aggregate = Eigen::VectorXd::Zero(gradients.cols());
    for (Eigen::Index j = 0; j < gradients.rows(); ++j) {
        weighted_sq += weights[j] * gradients.row(j).squaredNorm();
        aggregate += weights[j] * gradients.row(j).transpose();
    }
    const double agg_sq = aggregate.squaredNorm();
    if (agg_sq <= 1e-14 * std::max(weighted_sq, 1e-300)) return std::nullopt;
    return weighted_sq / agg_sq;
}

namespace {

double bracket(const TrainingConstants& c, double k, double local_epochs, double gamma,
               double avg_data_size) {
    const double comm = (c.noniid_metric - 1.0) / (k * (1.0 - gamma)) / (2.0 * avg_data_size);
    return comm + local_epoch_bracket(c, local_epochs);
}

double prefactor(const TrainingConstants& c, double epsilon) {
    return 4.0 * c.smoothness * c.smoothness * c.gradient_bound_sq * c.noniid_metric /
           (c.pl_constant * c.pl_constant) / epsilon;
}

} // namespace

double local_epoch_bracket(const TrainingConstants& c, double local_epochs) {
    require(local_epochs >= 1, "local_epochs must be >= 1");
    return (c.noniid_metric - 1.0) * local_epochs / (2.0 * c.stochastic_coeff * c.bound_ratio) +
           c.init_gradient_ratio / (4.0 * local_epochs);
}

double predict_global_epochs(const TrainingConstants& c, double epsilon, double k,
                             double local_epochs, double gamma, double avg_data_size) {
    c.validate();
    require(epsilon > 0, "epsilon must be > 0");
    require(k >= 1, "K must be >= 1");
    require(gamma >= 0 && gamma < 1, "loss_rate out of range [0,1)");
    require(avg_data_size >= 1, "avg_data_size must be >= 1");
    return prefactor(c, epsilon) * bracket(c, k, local_epochs, gamma, avg_data_size);
}

LocalEpochChoice optimal_local_epochs(const TrainingConstants& c, int cap_el) {
    c.validate();
    LocalEpochChoice choice;
    if (c.iid()) {
        choice.unbounded = true;
        choice.real = std::numeric_limits<double>::infinity();
        if (cap_el < 1) {
            throw NumericalError(
                "optimal_local_epochs: unbounded for iid data; cap by config el_max");
        }
        choice.rounded = cap_el;
        return choice;
    }
    choice.real = std::sqrt(c.stochastic_coeff * c.bound_ratio * c.init_gradient_ratio /
                            (2.0 * (c.noniid_metric - 1.0)));
    const double lo = std::max(1.0, std::floor(choice.real));
    const double hi = std::max(1.0, std::ceil(choice.real));
    choice.rounded = static_cast<int>(
        local_epoch_bracket(c, lo) <= local_epoch_bracket(c, hi) ? lo : hi);
    if (cap_el >= 1) choice.rounded = std::min(choice.rounded, cap_el);
    return choice;
}

void LossBoundModel::validate() const {
    constants.validate();
    schedule.validate(constants.pl_constant);
    require(k >= 1, "K must be >= 1");
    require(local_epochs >= 1, "local_epochs must be >= 1");
    require(gamma >= 0 && gamma < 1, "loss_rate out of range [0,1)");
    require(avg_data_size >= 1, "avg_data_size must be >= 1");
}

double LossBoundModel::drift_aggregate() const {
    const TrainingConstants& c = constants;
    const double survivors = k * (1.0 - gamma);
    const double noise_term =
        1.0 / (2.0 * c.smoothness * survivors * avg_data_size * local_epochs);
    const double comm_term = (c.noniid_metric - 1.0) / (2.0 * survivors * avg_data_size);
    const double drift_term = (c.noniid_metric - 1.0) * local_epochs /
                              (2.0 * c.stochastic_coeff * c.bound_ratio);
    return local_epochs * c.gradient_bound_sq * c.smoothness * c.smoothness * c.noniid_metric *
           (drift_term + noise_term + comm_term);
}

double LossBoundModel::induction_constant() const {
    const double m = drift_aggregate();
    const double from_drift =
        schedule.v * schedule.v * m / (constants.pl_constant * schedule.v - 1.0);
    const double from_init =
        std::pow(schedule.beta + 1.0, schedule.alpha) * constants.initial_gap;
    return std::max(from_drift, from_init);
}

double LossBoundModel::induction_bound(long long t) const {
    return induction_constant() /
           std::pow(static_cast<double>(t) + schedule.beta, schedule.alpha);
}

double loss_bound_at(const TrainingConstants& c, double k, double local_epochs, double gamma,
                     double avg_data_size, double t) {
    require(t > 0, "loss_bound_at: t must be positive");
    return 4.0 * local_epochs * c.smoothness * c.smoothness * c.gradient_bound_sq *
           c.noniid_metric / (c.pl_constant * c.pl_constant) *
           bracket(c, k, local_epochs, gamma, avg_data_size) / t;
}

std::vector<double> loss_bound_curve(const LossBoundModel& model, long long t_max) {
    model.validate();
    require(t_max >= 1, "loss_bound_curve: t_max must be >= 1");
    std::vector<double> curve(static_cast<std::size_t>(t_max));
    for (long long t = 1; t <= t_max; ++t) {
        curve[static_cast<std::size_t>(t - 1)] =
            loss_bound_at(model.constants, model.k, model.local_epochs, model.gamma,
                          model.avg_data_size, static_cast<double>(t));
    }
    return curve;
}

double loss_bound_dropped_term(const TrainingConstants& c, double k, double local_epochs,
                               double gamma, double avg_data_size, double t) {
    require(t > 0, "loss_bound_dropped_term: t must be positive");
    const double noise_term = 1.0 / (2.0 * c.smoothness * k * (1.0 - gamma) * avg_data_size *
                                     local_epochs);
    return 4.0 * local_epochs * c.smoothness * c.smoothness * c.gradient_bound_sq *
           c.noniid_metric / (c.pl_constant * c.pl_constant) * noise_term / t;
}

Eigen::VectorXd nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
    // Lawson-Hanson active set; fine for the handful of columns used here
    const Eigen::Index n = a.cols();
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    std::set<Eigen::Index> passive;
    Eigen::VectorXd w = a.transpose() * (b - a * x);

    for (int outer = 0; outer < 30 * static_cast<int>(n) + 10; ++outer) {
        Eigen::Index best = -1;
        double best_w = 1e-12 * std::max(1.0, b.norm());
        for (Eigen::Index j = 0; j < n; ++j) {
            if (!passive.count(j) && w[j] > best_w) {
                best_w = w[j];
                best = j;
            }
        }
        if (best < 0) break;
        passive.insert(best);

        while (true) {
            std::vector<Eigen::Index> cols(passive.begin(), passive.end());
            Eigen::MatrixXd ap(a.rows(), static_cast<Eigen::Index>(cols.size()));
            for (std::size_t i = 0; i < cols.size(); ++i) ap.col(static_cast<Eigen::Index>(i)) = a.col(cols[i]);
            const Eigen::VectorXd z =
                ap.colPivHouseholderQr().solve(b);
            bool all_positive = true;
            for (Eigen::Index i = 0; i < z.size(); ++i)
                if (z[i] <= 0) all_positive = false;
            if (all_positive) {
                x.setZero();
                for (std::size_t i = 0; i < cols.size(); ++i) x[cols[i]] = z[static_cast<Eigen::Index>(i)];
                break;
            }
            double alpha = 1.0;
            for (std::size_t i = 0; i < cols.size(); ++i) {
                const Eigen::Index j = cols[i];
                const double zi = z[static_cast<Eigen::Index>(i)];
                if (zi <= 0) alpha = std::min(alpha, x[j] / (x[j] - zi));
            }
            for (std::size_t i = 0; i < cols.size(); ++i) {
                const Eigen::Index j = cols[i];
                x[j] += alpha * (z[static_cast<Eigen::Index>(i)] - x[j]);
            }
            for (auto it = passive.begin(); it != passive.end();) {
                if (x[*it] <= 1e-15) it = passive.erase(it);
                else ++it;
            }
            if (passive.empty()) break;
        }
        w = a.transpose() * (b - a * x);
    }
    return x;
}

GepsFit fit_g_epsilon(const std::vector<GepsSample>& samples) {
    require(samples.size() >= 4, "fit_g_epsilon: need at least 4 samples");
    std::set<double> ks, els;
    for (const auto& s : samples) {
        ks.insert(s.k);
        els.insert(s.local_epochs);
    }
    require(ks.size() >= 2 && els.size() >= 2,
            "fit_g_epsilon: rank-deficient design, need >= 2 distinct K and E_l");

    const auto m = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd a(m, 3);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        a(i, 0) = 1.0 / (s.k * (1.0 - s.gamma) * s.avg_data_size);
        a(i, 1) = s.local_epochs;
        a(i, 2) = 1.0 / s.local_epochs;
        b[i] = s.g_epsilon;
    }
    // column scaling keeps the active-set solve well conditioned
    Eigen::Vector3d scale;
    for (int j = 0; j < 3; ++j) {
        scale[j] = a.col(j).norm();
        require(scale[j] > 0, "fit_g_epsilon: degenerate design column");
        a.col(j) /= scale[j];
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
    require(svd.singularValues()[2] > 1e-10 * svd.singularValues()[0],
            "fit_g_epsilon: rank-deficient design, insufficient variation");

    Eigen::VectorXd x = nnls(a, b);
    GepsFit fit;
    fit.comm_coeff = x[0] / scale[0];
    fit.drift_coeff = x[1] / scale[1];
    fit.init_coeff = x[2] / scale[2];
    fit.residuals = b - a * x;
    const double ss_res = fit.residuals.squaredNorm();
    const double ss_tot = (b.array() - b.mean()).matrix().squaredNorm();
    fit.r_squared = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
    return fit;
}

} // namespace fedsched
