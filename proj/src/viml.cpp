#include "fairdist/viml.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fairdist/errors.hpp"
#include "fairdist/explore.hpp"
#include "fairdist/logging.hpp"
#include "fairdist/rng.hpp"

namespace fairdist {

namespace {

constexpr double kGridMax = 50.0;
constexpr int kGridPoints = 1000;

double clamp_qform(double t) {
    if (std::isnan(t)) throw numeric_error("score: quadratic form is NaN");
    return std::max(t, 0.0);
}

std::vector<int> labels_of(const ComparisonTriplets& data) {
    std::vector<int> labels(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.items[i].label;
    return labels;
}

std::vector<int> iota_batch(std::size_t n) {
    std::vector<int> all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
    return all;
}

double median_squared_norm(const Eigen::MatrixXd& X) {
    std::vector<double> norms(static_cast<std::size_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        norms[static_cast<std::size_t>(i)] = X.row(i).squaredNorm();
    auto mid = norms.begin() + norms.size() / 2;
    std::nth_element(norms.begin(), mid, norms.end());
    return *mid > 0.0 ? *mid : 1.0;
}

Eigen::MatrixXd identity_scaled_init(const Eigen::MatrixXd& X) {
    return Eigen::MatrixXd::Identity(X.cols(), X.cols()) / median_squared_norm(X);
}

} // namespace

LinkFunction::LinkFunction(std::string name, std::function<double(double)> fn)
    : name_(std::move(name)), fn_(std::move(fn)) {
    double prev = 2.0;
    for (int i = 0; i < kGridPoints; ++i) {
        const double t = kGridMax * static_cast<double>(i) / (kGridPoints - 1);
        const double p = fn_(t);
        if (!std::isfinite(p) || p < 0.0 || p > 1.0 + 1e-12)
            throw validation_error("link '" + name_ + "': value " + std::to_string(p) + " at t = " +
                                   std::to_string(t) + " is not a probability");
        if (p > prev + 1e-12)
            throw validation_error("link '" + name_ + "' is not nonincreasing near t = " +
                                   std::to_string(t));
        prev = p;
    }
}

LinkFunction LinkFunction::logistic() {
    return LinkFunction("logistic", [](double t) { return 1.0 / (1.0 + std::exp(t)); });
}

LinkFunction LinkFunction::scaled_logistic(double epsilon) {
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw validation_error("scaled_logistic: epsilon must lie in [0, 1)");
    std::ostringstream name;
    name << "scaled:" << epsilon;
    return LinkFunction(name.str(),
                        [epsilon](double t) { return (2.0 - epsilon) / (1.0 + std::exp(t)); });
}

LinkFunction LinkFunction::probit() {
    return LinkFunction("probit",
                        [](double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); });
}

LinkFunction LinkFunction::table(std::vector<std::pair<double, double>> knots) {
    if (knots.size() < 2) throw validation_error("table link: need at least two knots");
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
        if (!(knots[i].first < knots[i + 1].first))
            throw validation_error("table link: knot abscissae must be strictly increasing");
        if (knots[i + 1].second > knots[i].second + 1e-12)
            throw validation_error("table link: probabilities must be nonincreasing");
    }
    for (const auto& [t, p] : knots)
        if (!(p >= 0.0 && p <= 1.0))
            throw validation_error("table link: probability " + std::to_string(p) +
                                   " outside [0, 1]");
    auto eval = [knots = std::move(knots)](double t) {
        if (t <= knots.front().first) return knots.front().second;
        if (t >= knots.back().first) return knots.back().second;
        auto hi = std::upper_bound(knots.begin(), knots.end(), t,
                                   [](double v, const auto& k) { return v < k.first; });
        auto lo = hi - 1;
        const double w = (t - lo->first) / (hi->first - lo->first);
        return (1.0 - w) * lo->second + w * hi->second;
    };
    return LinkFunction("table", std::move(eval));
}

LinkFunction LinkFunction::table_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("table link: cannot open " + path);
    std::vector<std::pair<double, double>> knots;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double t, p;
        if (!(ss >> t)) continue;
        if (!(ss >> p))
            throw validation_error("table link: line " + std::to_string(lineno) + " of " + path +
                                   " needs two columns `t p`");
        knots.emplace_back(t, p);
    }
    return table(std::move(knots));
}

LinkFunction LinkFunction::parse(const std::string& spec) {
    if (spec == "logistic") return logistic();
    if (spec == "probit") return probit();
    if (spec.rfind("scaled:", 0) == 0) {
        try {
            return scaled_logistic(std::stod(spec.substr(7)));
        } catch (const std::invalid_argument&) {
            throw validation_error("bad link spec '" + spec + "': expected scaled:<eps>");
        }
    }
    if (spec.rfind("table:", 0) == 0) return table_from_file(spec.substr(6));
    throw validation_error("unknown link spec '" + spec +
                           "' (expected logistic|scaled:<eps>|probit|table:<path>)");
}

void validate(const VISolverConfig& config) {
    if (!(config.step > 0.0)) throw validation_error("step must be positive");
    if (config.averaging == ViAveraging::geometric && !(config.beta > 0.0 && config.beta < 1.0))
        throw validation_error("geometric averaging requires beta in (0, 1)");
    if (config.iterations < 0) throw validation_error("iterations must be nonnegative");
    if (config.batch_size < 1) throw validation_error("batch_size must be positive");
    if (!(config.radius > 0.0)) throw validation_error("radius must be positive");
    if (config.merit_samples < 1) throw validation_error("merit_samples must be positive");
    if (config.checkpoint_every < 0) throw validation_error("checkpoint_every must be nonnegative");
}

namespace detail {

Eigen::MatrixXd score_raw(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& X,
                          const std::vector<int>& labels, const std::vector<int>& batch,
                          const LinkFunction& link) {
    if (batch.empty()) throw validation_error("score: empty batch");
    const int d = static_cast<int>(sigma.rows());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(d, d);
    for (int idx : batch) {
        const auto x = X.row(idx);
        const double t = clamp_qform(x * sigma * x.transpose());
        const double r = static_cast<double>(labels[static_cast<std::size_t>(idx)]) - link.prob(t);
        M.noalias() += r * (x.transpose() * x);
    }
    M /= static_cast<double>(batch.size());
    return 0.5 * (M + M.transpose());
}

} // namespace detail

Eigen::MatrixXd score(const FairMetric& metric, const EmbeddingTable& embeddings,
                      const ComparisonTriplets& batch, const LinkFunction& link) {
    if (batch.empty()) throw validation_error("score: empty batch");
    if (metric.dim() != embeddings.dim())
        throw validation_error("score: metric dim does not match embedding dim");
    const Eigen::MatrixXd X = detail::pair_differences(embeddings, batch);
    return detail::score_raw(metric.matrix(), X, labels_of(batch), iota_batch(batch.size()), link);
}

Eigen::MatrixXd sg_step(const Eigen::MatrixXd& sigma, const EmbeddingTable& embeddings,
                        const ComparisonTriplets& batch, const LinkFunction& link, double eta) {
    if (!(eta > 0.0)) throw validation_error("sg_step: eta must be positive");
    const Eigen::MatrixXd M = score(FairMetric(sigma, MetricMethod::viml), embeddings, batch, link);
    const Eigen::MatrixXd proposal = sigma - eta * M;
    if (!proposal.allFinite()) throw numeric_error("sg_step: non-finite update");
    return proj_psd(proposal);
}

Eigen::MatrixXd seg_step(const Eigen::MatrixXd& sigma, const EmbeddingTable& embeddings,
                         const ComparisonTriplets& batch1, const ComparisonTriplets& batch2,
                         const LinkFunction& link, double eta) {
    if (!(eta > 0.0)) throw validation_error("seg_step: eta must be positive");
    const Eigen::MatrixXd half = sg_step(sigma, embeddings, batch1, link, eta);
    const Eigen::MatrixXd M_half =
        score(FairMetric(half, MetricMethod::viml), embeddings, batch2, link);
    const Eigen::MatrixXd proposal = sigma - eta * M_half;
    if (!proposal.allFinite()) throw numeric_error("seg_step: non-finite update");
    return proj_psd(proposal);
}

FairMetric averaged_iterate(const std::vector<std::pair<Eigen::MatrixXd, double>>& history,
                            ViAveraging averaging, double beta) {
    if (history.empty()) throw validation_error("averaged_iterate: empty history");
    Eigen::MatrixXd avg;
    switch (averaging) {
        case ViAveraging::none:
            avg = history.back().first;
            break;
        case ViAveraging::uniform: {
            avg = Eigen::MatrixXd::Zero(history.front().first.rows(), history.front().first.cols());
            double wsum = 0.0;
            for (const auto& [x, eta] : history) {
                if (!(eta > 0.0)) throw validation_error("averaged_iterate: steps must be positive");
                wsum += eta;
                avg += (eta / wsum) * (x - avg);
            }
            break;
        }
        case ViAveraging::geometric: {
            if (!(beta > 0.0 && beta < 1.0))
                throw validation_error("averaged_iterate: beta must lie in (0, 1)");
            avg = history.front().first;
            for (std::size_t i = 1; i < history.size(); ++i)
                avg = (1.0 - beta) * history[i].first + beta * avg;
            break;
        }
    }
    return FairMetric(proj_psd(avg), MetricMethod::viml);
}

ViResult viml_fit(const EmbeddingTable& embeddings, const ComparisonTriplets& data,
                  const LinkFunction& link, const VISolverConfig& config) {
    validate(config);
    if (data.empty()) throw validation_error("viml_fit: no triplets");
    const std::vector<int> labels = labels_of(data);
    const Eigen::MatrixXd X = detail::pair_differences(embeddings, data);
    const long n = static_cast<long>(data.size());

    Eigen::MatrixXd sigma = identity_scaled_init(X);

    // The score scales like (pair distance)^2 and the iterate like its
    // inverse, so the configured step is normalized by the squared median
    // pair distance. Defaults then behave the same across data scales.
    const double med = median_squared_norm(X);
    const double step_scale = 1.0 / (med * med);

    Rng rng(split_seed(config.seed, 0x51));
    std::vector<int> order = iota_batch(static_cast<std::size_t>(n));
    long cursor = n;  // forces an initial shuffle

    auto next_batch = [&](std::vector<int>& batch) {
        batch.clear();
        for (int i = 0; i < config.batch_size; ++i) {
            if (cursor >= n) {
                shuffle(order, rng);
                cursor = 0;
            }
            batch.push_back(order[static_cast<std::size_t>(cursor++)]);
        }
    };

    const long ckpt = config.checkpoint_every > 0
                          ? config.checkpoint_every
                          : std::max<long>(1, config.iterations / 20);

    Eigen::MatrixXd avg = sigma;
    double wsum = 0.0;
    bool have_avg = false;
    std::vector<ViCheckpoint> log_records;
    std::vector<int> batch1, batch2;

    auto current_estimate = [&]() -> Eigen::MatrixXd {
        if (config.averaging == ViAveraging::none || !have_avg) return sigma;
        return avg;
    };

    auto record = [&](long iter) {
        const Eigen::MatrixXd est = proj_psd(current_estimate());
        const FairMetric m(est, MetricMethod::viml);
        const double res = residual(m, embeddings, data, link, config.step * step_scale);
        const double merit = restricted_merit_mc(m, embeddings, data, link, config.radius,
                                                 config.merit_samples,
                                                 split_seed(config.seed, 0xA0 + static_cast<std::uint64_t>(iter)));
        const double min_eig = sym_eigen(sigma).eigenvalues.minCoeff();
        log_records.push_back({iter, res, merit, min_eig});
    };

    for (long t = 0; t < config.iterations; ++t) {
        const double base = config.step * step_scale;
        const double eta = config.schedule == ViStepSchedule::constant
                               ? base
                               : base / std::sqrt(1.0 + static_cast<double>(t));
        next_batch(batch1);
        const Eigen::MatrixXd M1 = detail::score_raw(sigma, X, labels, batch1, link);
        Eigen::MatrixXd proposal;
        if (config.method == ViMethod::sg) {
            proposal = sigma - eta * M1;
        } else {
            const Eigen::MatrixXd half = proj_psd(sigma - eta * M1);
            next_batch(batch2);
            const Eigen::MatrixXd M2 = detail::score_raw(half, X, labels, batch2, link);
            proposal = sigma - eta * M2;
        }
        if (!proposal.allFinite())
            throw numeric_error("viml_fit: iterate diverged; retry with a smaller step");
        sigma = proj_psd(proposal);

        switch (config.averaging) {
            case ViAveraging::none:
                break;
            case ViAveraging::uniform:
                wsum += eta;
                if (!have_avg) avg = sigma;
                else avg += (eta / wsum) * (sigma - avg);
                have_avg = true;
                break;
            case ViAveraging::geometric:
                if (!have_avg) avg = sigma;
                else avg = (1.0 - config.beta) * sigma + config.beta * avg;
                have_avg = true;
                break;
        }

        if ((t + 1) % ckpt == 0 || t + 1 == config.iterations) record(t + 1);
    }
    if (config.iterations == 0) record(0);

    FairMetric fitted(proj_psd(current_estimate()), MetricMethod::viml);
    return ViResult{std::move(fitted), std::move(log_records)};
}

double residual(const FairMetric& metric, const EmbeddingTable& embeddings,
                const ComparisonTriplets& data, const LinkFunction& link, double eta) {
    if (!(eta > 0.0)) throw validation_error("residual: eta must be positive");
    const Eigen::MatrixXd M = score(metric, embeddings, data, link);
    const Eigen::MatrixXd stepped = proj_psd(metric.matrix() - eta * M);
    return (metric.matrix() - stepped).norm() / eta;
}

double restricted_merit_mc(const FairMetric& metric, const EmbeddingTable& embeddings,
                           const ComparisonTriplets& data, const LinkFunction& link,
                           double radius, int samples, std::uint64_t seed) {
    if (!(radius > 0.0)) throw validation_error("restricted_merit_mc: radius must be positive");
    if (samples < 1) throw validation_error("restricted_merit_mc: need at least one sample");
    const Eigen::MatrixXd X = detail::pair_differences(embeddings, data);
    const std::vector<int> labels = labels_of(data);
    const std::vector<int> all = iota_batch(labels.size());
    const int d = metric.dim();

    Rng rng(split_seed(seed, 0x3E));
    double best = 0.0;
    for (int s = 0; s < samples; ++s) {
        Eigen::MatrixXd W(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) W(i, j) = standard_normal(rng);
        W = 0.5 * (W + W.transpose());
        const double norm = W.norm();
        if (norm == 0.0) continue;
        const double r = radius * uniform01(rng);
        // proj_psd is nonexpansive and fixes the PSD center, so y stays in the ball.
        const Eigen::MatrixXd y = proj_psd(metric.matrix() + (r / norm) * W);
        const Eigen::MatrixXd My = detail::score_raw(y, X, labels, all, link);
        best = std::max(best, (My.array() * (metric.matrix() - y).array()).sum());
    }
    return best;
}

} // namespace fairdist
