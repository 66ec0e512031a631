#include "fairdist/explore.hpp"

#include <algorithm>
#include <cmath>

#include "fairdist/errors.hpp"
#include "fairdist/logging.hpp"
#include "fairdist/rng.hpp"

namespace fairdist {

namespace {

void check_epsilon(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw validation_error("epsilon must lie in [0, 1), got " + std::to_string(epsilon));
}

// Quadratic forms of a PSD matrix are nonnegative up to rounding; tiny
// negatives are clamped, anything worse indicates a non-PSD input.
double clamp_qform(double t, std::size_t index) {
    if (std::isnan(t)) throw numeric_error("quadratic form is NaN at triplet " + std::to_string(index + 1));
    if (t < -1e-8)
        throw validation_error("negative quadratic form " + std::to_string(t) + " at triplet " +
                               std::to_string(index + 1) + "; metric must be PSD");
    return std::max(t, 0.0);
}

// log F*(t) and log(1 - F*(t)) written in terms of u = e^{-t}, which stays in
// (0, 1] for t >= 0 and never overflows:
//   log F*(t)     = log(2 - eps) - t - log1p(u)
//   log(1 - F*(t)) = log1p(-(1 - eps) u) - log1p(u)
double log_link(double t, double epsilon) {
    const double u = std::exp(-t);
    return std::log(2.0 - epsilon) - t - std::log1p(u);
}

double log_one_minus_link(double t, double epsilon, std::size_t index) {
    const double u = std::exp(-t);
    const double inner = -(1.0 - epsilon) * u;
    if (inner <= -1.0)
        throw numeric_error("log of nonpositive argument at triplet " + std::to_string(index + 1) +
                            ": distance 0 with label 0 requires epsilon > 0");
    return std::log1p(inner) - std::log1p(u);
}

// Per-sample gradient weight dell/dt.
double grad_weight(double t, int label, double epsilon, std::size_t index) {
    const double u = std::exp(-t);
    if (label == 1) return -1.0 / (1.0 + u);
    const double denom = 1.0 - (1.0 - epsilon) * u;
    if (denom <= 0.0)
        throw numeric_error("gradient undefined at triplet " + std::to_string(index + 1) +
                            ": distance 0 with label 0 requires epsilon > 0");
    return (2.0 - epsilon) * u / ((1.0 + u) * denom);
}

Eigen::MatrixXd clip_op_norm(const Eigen::MatrixXd& S, double cap) {
    const SymEigen eig = sym_eigen(S);
    if (eig.eigenvalues.maxCoeff() <= cap) return S;
    const Eigen::VectorXd clipped = eig.eigenvalues.cwiseMin(cap);
    return 0.5 * (eig.eigenvectors * clipped.asDiagonal() * eig.eigenvectors.transpose() +
                  (eig.eigenvectors * clipped.asDiagonal() * eig.eigenvectors.transpose()).transpose());
}

} // namespace

void validate(const ExploreConfig& config) {
    check_epsilon(config.epsilon);
    if (!(config.step0 > 0.0)) throw validation_error("step0 must be positive");
    if (config.batch_size < 1) throw validation_error("batch_size must be positive");
    if (config.epochs < 1) throw validation_error("epochs must be positive");
    if (config.lambda_max && !(*config.lambda_max > 0.0))
        throw validation_error("lambda_max must be positive when set");
}

double scaled_link(double t, double epsilon) {
    check_epsilon(epsilon);
    if (std::isnan(t)) throw numeric_error("scaled_link: NaN input");
    return (2.0 - epsilon) / (1.0 + std::exp(t));
}

namespace detail {

Eigen::MatrixXd pair_differences(const EmbeddingTable& embeddings, const ComparisonTriplets& data) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), embeddings.dim());
    for (std::size_t i = 0; i < data.size(); ++i)
        X.row(static_cast<Eigen::Index>(i)) =
            embeddings.matrix().row(data.items[i].a) - embeddings.matrix().row(data.items[i].b);
    return X;
}

double log_likelihood_raw(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& X,
                          const std::vector<int>& labels, double epsilon) {
    const std::size_t n = labels.size();
    if (n == 0) throw validation_error("log_likelihood: no triplets");
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = X.row(static_cast<Eigen::Index>(i));
        const double t = clamp_qform(x * sigma * x.transpose(), i);
        total += labels[i] ? log_link(t, epsilon) : log_one_minus_link(t, epsilon, i);
    }
    return total / static_cast<double>(n);
}

Eigen::MatrixXd grad_raw(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& X,
                         const std::vector<int>& labels, const std::vector<int>& batch,
                         double epsilon) {
    const int d = static_cast<int>(sigma.rows());
    Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(d, d);
    if (batch.empty()) return grad;
    for (int idx : batch) {
        const auto x = X.row(idx);
        const double t = clamp_qform(x * sigma * x.transpose(), static_cast<std::size_t>(idx));
        const double w = grad_weight(t, labels[static_cast<std::size_t>(idx)], epsilon,
                                     static_cast<std::size_t>(idx));
        grad.noalias() += w * (x.transpose() * x);
    }
    grad /= static_cast<double>(batch.size());
    return 0.5 * (grad + grad.transpose());
}

} // namespace detail

double log_likelihood(const FairMetric& metric, const EmbeddingTable& embeddings,
                      const ComparisonTriplets& data, double epsilon) {
    check_epsilon(epsilon);
    if (metric.dim() != embeddings.dim())
        throw validation_error("log_likelihood: metric dim " + std::to_string(metric.dim()) +
                               " does not match embedding dim " + std::to_string(embeddings.dim()));
    std::vector<int> labels(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.items[i].label;
    return detail::log_likelihood_raw(metric.matrix(), detail::pair_differences(embeddings, data),
                                      labels, epsilon);
}

Eigen::MatrixXd grad_log_likelihood(const FairMetric& metric, const EmbeddingTable& embeddings,
                                    const ComparisonTriplets& batch, double epsilon) {
    check_epsilon(epsilon);
    if (batch.empty()) return Eigen::MatrixXd::Zero(metric.dim(), metric.dim());
    if (metric.dim() != embeddings.dim())
        throw validation_error("grad_log_likelihood: metric dim does not match embedding dim");
    std::vector<int> labels(batch.size());
    std::vector<int> all(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        labels[i] = batch.items[i].label;
        all[i] = static_cast<int>(i);
    }
    return detail::grad_raw(metric.matrix(), detail::pair_differences(embeddings, batch), labels,
                            all, epsilon);
}

ExploreResult explore_fit(const EmbeddingTable& embeddings, const ComparisonTriplets& data,
                          const ExploreConfig& config) {
    validate(config);
    if (data.empty()) throw validation_error("explore_fit: no triplets");
    const int d = embeddings.dim();
    const long n = static_cast<long>(data.size());

    std::vector<int> labels(data.size());
    long positives = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        labels[i] = data.items[i].label;
        positives += labels[i];
    }
    if (positives == 0 || positives == n)
        log::warn("explore_fit: all labels are " + std::to_string(labels[0]) +
                  "; the fit is weakly identified");

    const Eigen::MatrixXd X = detail::pair_differences(embeddings, data);

    Eigen::MatrixXd sigma;
    if (config.init == ExploreInit::zero) {
        sigma = Eigen::MatrixXd::Zero(d, d);
    } else {
        // Scale the identity so initial quadratic forms are O(1).
        std::vector<double> norms(static_cast<std::size_t>(n));
        for (long i = 0; i < n; ++i) norms[static_cast<std::size_t>(i)] = X.row(i).squaredNorm();
        auto mid = norms.begin() + norms.size() / 2;
        std::nth_element(norms.begin(), mid, norms.end());
        const double med = *mid;
        sigma = Eigen::MatrixXd::Identity(d, d) / (med > 0.0 ? med : 1.0);
    }

    Rng rng(split_seed(config.seed, 0xE5));
    std::vector<int> order(static_cast<std::size_t>(n));
    for (long i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = static_cast<int>(i);

    std::vector<EpochRecord> records;
    records.reserve(static_cast<std::size_t>(config.epochs));
    long tstep = 0;
    std::vector<int> batch;
    batch.reserve(static_cast<std::size_t>(config.batch_size));

    // The returned estimate is the step-weighted average of the final epoch's
    // iterates (tail averaging): the last raw iterate carries an O(sqrt(eta))
    // noise floor that would mask the statistical error at large n.
    Eigen::MatrixXd tail_avg = sigma;
    double tail_wsum = 0.0;
    bool tail_started = false;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        shuffle(order, rng);
        const bool last_epoch = epoch == config.epochs;
        for (long start = 0; start < n; start += config.batch_size) {
            batch.clear();
            const long end = std::min<long>(start + config.batch_size, n);
            for (long i = start; i < end; ++i) batch.push_back(order[static_cast<std::size_t>(i)]);
            const Eigen::MatrixXd grad = detail::grad_raw(sigma, X, labels, batch, config.epsilon);
            const double eta = config.step0 / std::sqrt(1.0 + static_cast<double>(tstep));
            ++tstep;
            const Eigen::MatrixXd proposal = sigma + eta * grad;
            if (!proposal.allFinite())
                throw numeric_error("explore_fit: iterate diverged; retry with a smaller step0");
            sigma = proj_psd(proposal);
            if (config.lambda_max) sigma = clip_op_norm(sigma, *config.lambda_max);
            if (config.iterate_observer) config.iterate_observer(sigma);
            if (last_epoch) {
                tail_wsum += eta;
                if (!tail_started) {
                    tail_avg = sigma;
                    tail_started = true;
                } else {
                    tail_avg += (eta / tail_wsum) * (sigma - tail_avg);
                }
            }
        }

        std::vector<int> all(static_cast<std::size_t>(n));
        for (long i = 0; i < n; ++i) all[static_cast<std::size_t>(i)] = static_cast<int>(i);
        const Eigen::MatrixXd& at = last_epoch ? tail_avg : sigma;
        const double loglik = detail::log_likelihood_raw(at, X, labels, config.epsilon);
        if (!std::isfinite(loglik))
            throw numeric_error("explore_fit: log-likelihood diverged; retry with a smaller step0");
        const double grad_norm = detail::grad_raw(at, X, labels, all, config.epsilon).norm();
        const double min_eig = sym_eigen(at).eigenvalues.minCoeff();
        records.push_back({epoch, loglik, grad_norm, min_eig});
    }

    Eigen::MatrixXd fitted = proj_psd(tail_avg);
    if (config.lambda_max) fitted = clip_op_norm(fitted, *config.lambda_max);
    return ExploreResult{FairMetric(std::move(fitted), MetricMethod::explore), std::move(records)};
}

} // namespace fairdist
