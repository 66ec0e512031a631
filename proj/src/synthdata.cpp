#include "fairdist/synthdata.hpp"

#include <cmath>
#include <cstdio>

#include "fairdist/errors.hpp"
#include "fairdist/logging.hpp"
#include "fairdist/rng.hpp"

namespace fairdist {

namespace {

double draw_latent(Rng& rng, LatentDist dist) {
    return dist == LatentDist::gaussian ? standard_normal(rng) : rademacher_mixture(rng);
}

std::vector<std::string> numbered_tokens(const char* prefix, int n) {
    std::vector<std::string> vocab;
    vocab.reserve(static_cast<std::size_t>(n));
    char buf[32];
    for (int i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof(buf), "%s%06d", prefix, i);
        vocab.emplace_back(buf);
    }
    return vocab;
}

Eigen::MatrixXd generate_rows(const FactorModelSpec& spec, int n, Rng& rng) {
    Eigen::MatrixXd rows(n, spec.d);
    Eigen::VectorXd mu(spec.k), nu(spec.l), noise(spec.d);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < spec.k; ++j) mu(j) = draw_latent(rng, spec.latent);
        for (int j = 0; j < spec.l; ++j) nu(j) = draw_latent(rng, spec.latent);
        for (int j = 0; j < spec.d; ++j) noise(j) = spec.sigma * standard_normal(rng);
        Eigen::VectorXd row = noise;
        if (spec.k > 0) row += spec.A_star * mu;
        if (spec.l > 0) row += spec.B_star * nu;
        rows.row(i) = row.transpose();
    }
    return rows;
}

Eigen::MatrixXd random_orthonormal(int d, int k, Rng& rng) {
    Eigen::MatrixXd G(d, k);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < k; ++j) G(i, j) = standard_normal(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
    return Eigen::MatrixXd(qr.householderQ()).leftCols(k);
}

} // namespace

void validate(const FactorModelSpec& spec) {
    if (spec.d < 1) throw validation_error("FactorModelSpec: d must be positive");
    if (spec.k < 0 || spec.l < 0)
        throw validation_error("FactorModelSpec: factor counts must be nonnegative");
    if (spec.A_star.rows() != spec.d || spec.A_star.cols() != spec.k)
        throw validation_error("FactorModelSpec: A_star must be d x k");
    if (spec.B_star.rows() != spec.d || spec.B_star.cols() != spec.l)
        throw validation_error("FactorModelSpec: B_star must be d x l");
    if (spec.sigma < 0.0) throw validation_error("FactorModelSpec: sigma must be nonnegative");
    if (spec.mean.size() != 0 && spec.mean.size() != spec.d)
        throw validation_error("FactorModelSpec: mean must be empty or length d");
    if (spec.k > 0 && sensitive_floor(spec) <= nuisance_op_norm(spec))
        log::warn("FactorModelSpec: sensitive variation does not dominate "
                  "(lambda_min(A*'A*) <= ||B*B*' + sigma^2 I||); estimates will be biased");
}

double sensitive_floor(const FactorModelSpec& spec) {
    if (spec.k == 0) return 0.0;
    const Eigen::MatrixXd gram = spec.A_star.transpose() * spec.A_star;
    return sym_eigen(gram).eigenvalues.minCoeff();
}

double nuisance_op_norm(const FactorModelSpec& spec) {
    double b_norm = 0.0;
    if (spec.l > 0) {
        const Eigen::MatrixXd gram = spec.B_star.transpose() * spec.B_star;
        b_norm = sym_eigen(gram).eigenvalues.maxCoeff();
    }
    return b_norm + spec.sigma * spec.sigma;
}

FactorModelSpec make_planted_spec(int d, int k, int l, double lambda_a, double lambda_b,
                                  double sigma, std::uint64_t seed) {
    if (d < 1 || k < 0 || l < 0 || k > d || l > d)
        throw validation_error("make_planted_spec: bad dimensions");
    if (lambda_a < 0.0 || lambda_b < 0.0)
        throw validation_error("make_planted_spec: eigenvalue targets must be nonnegative");
    Rng rng(split_seed(seed, 0x5D));
    FactorModelSpec spec;
    spec.d = d;
    spec.k = k;
    spec.l = l;
    spec.A_star = k > 0 ? Eigen::MatrixXd(std::sqrt(lambda_a) * random_orthonormal(d, k, rng))
                        : Eigen::MatrixXd(d, 0);
    spec.B_star = l > 0 ? Eigen::MatrixXd(std::sqrt(lambda_b) * random_orthonormal(d, l, rng))
                        : Eigen::MatrixXd(d, 0);
    spec.sigma = sigma;
    validate(spec);
    return spec;
}

SensitiveSubspace planted_subspace(const FactorModelSpec& spec) {
    validate(spec);
    if (spec.k == 0) throw validation_error("planted_subspace: spec has no sensitive factors");
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(spec.A_star);
    Eigen::MatrixXd Q = Eigen::MatrixXd(qr.householderQ()).leftCols(spec.k);
    return make_sensitive_subspace(std::move(Q));
}

EmbeddingTable gen_pair_differences(const FactorModelSpec& spec, int n, std::uint64_t seed) {
    validate(spec);
    if (n < 1) throw validation_error("gen_pair_differences: n must be positive");
    Rng rng(split_seed(seed, 0xD1));
    return EmbeddingTable(numbered_tokens("z", n), generate_rows(spec, n, rng));
}

EmbeddingTable gen_group(const FactorModelSpec& spec, int n, std::uint64_t seed) {
    validate(spec);
    if (n < 1) throw validation_error("gen_group: n must be positive");
    // Same stream as gen_pair_differences: with a zero mean the two generators
    // produce identical rows for the same seed.
    Rng rng(split_seed(seed, 0xD1));
    Eigen::MatrixXd rows = generate_rows(spec, n, rng);
    if (spec.mean.size() == spec.d) rows.rowwise() += spec.mean.transpose();
    return EmbeddingTable(numbered_tokens("g", n), std::move(rows));
}

EmbeddingTable pair_table_from_differences(const EmbeddingTable& differences) {
    const int n = differences.size();
    const int d = differences.dim();
    Eigen::MatrixXd rows(2 * n, d);
    std::vector<std::string> vocab;
    vocab.reserve(static_cast<std::size_t>(2 * n));
    char buf[32];
    for (int i = 0; i < n; ++i) {
        rows.row(2 * i) = 0.5 * differences.matrix().row(i);
        rows.row(2 * i + 1) = -0.5 * differences.matrix().row(i);
        std::snprintf(buf, sizeof(buf), "p%06d_a", i);
        vocab.emplace_back(buf);
        std::snprintf(buf, sizeof(buf), "p%06d_b", i);
        vocab.emplace_back(buf);
    }
    return EmbeddingTable(std::move(vocab), std::move(rows));
}

ComparisonTriplets gen_binary_response(const EmbeddingTable& pairs, const FairMetric& sigma0,
                                       const std::function<double(double)>& prob,
                                       std::uint64_t seed) {
    if (pairs.size() % 2 != 0)
        throw validation_error("gen_binary_response: table must hold consecutive-row pairs");
    if (pairs.dim() != sigma0.dim())
        throw validation_error("gen_binary_response: metric dim does not match table dim");
    Rng rng(split_seed(seed, 0xB1));
    std::vector<ComparisonTriplets::Triplet> items;
    items.reserve(static_cast<std::size_t>(pairs.size() / 2));
    for (int i = 0; i + 1 < pairs.size(); i += 2) {
        const double t = std::max(0.0, sigma0.distance(pairs.row(i), pairs.row(i + 1)));
        const double p = prob(t);
        if (!(p >= 0.0 && p <= 1.0))
            throw numeric_error("gen_binary_response: response probability " + std::to_string(p) +
                                " outside [0, 1] at distance " + std::to_string(t));
        const int y = uniform01(rng) <= p ? 1 : 0;
        items.push_back({i, i + 1, y});
    }
    return make_triplets(pairs, std::move(items));
}

ComparisonTriplets gen_binary_response(const EmbeddingTable& pairs, const FairMetric& sigma0,
                                       double epsilon, std::uint64_t seed) {
    if (!(epsilon >= 0.0 && epsilon < 1.0))
        throw validation_error("gen_binary_response: epsilon must lie in [0, 1)");
    return gen_binary_response(
        pairs, sigma0,
        [epsilon](double t) { return (2.0 - epsilon) / (1.0 + std::exp(t)); }, seed);
}

BoundQuantities theoretical_bound(const FactorModelSpec& spec, long n, double t, double C) {
    validate(spec);
    if (spec.k == 0) throw validation_error("theoretical_bound: spec has no sensitive factors");
    if (n < 1) throw validation_error("theoretical_bound: n must be positive");
    if (t < 0.0) throw validation_error("theoretical_bound: t must be nonnegative");
    if (C <= 0.0) throw validation_error("theoretical_bound: C must be positive");

    const double floor = sensitive_floor(spec);
    const double noise = nuisance_op_norm(spec);
    double b = 0.0;
    if (noise > 0.0) {
        const double ratio = floor / noise;
        if (ratio <= 1.0)
            throw validation_error("theoretical_bound: dominance assumption violated "
                                   "(lambda_min(A*'A*) <= ||B*B*' + sigma^2 I||)");
        b = 1.0 / (ratio - 1.0);
    }

    double b_only = 0.0;
    if (spec.l > 0) {
        const Eigen::MatrixXd gram = spec.B_star.transpose() * spec.B_star;
        b_only = sym_eigen(gram).eigenvalues.maxCoeff();
    }
    const double gamma = floor - b_only;

    const double sqrt_n = std::sqrt(static_cast<double>(n));
    const double cap = std::min(sqrt_n * gamma - C * std::sqrt(spec.d),
                                std::sqrt(static_cast<double>(n) * gamma) - C * std::sqrt(spec.d));
    if (!(t < cap))
        throw validation_error("theoretical_bound: t = " + std::to_string(t) +
                               " is not below the admissible cap " + std::to_string(cap));

    const double delta = (C * std::sqrt(spec.d) + t) / sqrt_n;
    const double dd = std::max(delta, delta * delta);
    if (gamma <= dd)
        throw validation_error("theoretical_bound: estimation term exceeds eigengap "
                               "(bound is vacuous at this n and t)");
    return BoundQuantities{b, gamma, delta, b + dd / (gamma - dd)};
}

} // namespace fairdist
