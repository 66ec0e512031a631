#include "fairdist/face.hpp"

#include <functional>

#include "fairdist/errors.hpp"
#include "fairdist/logging.hpp"

namespace fairdist {

namespace {

// Sums f(0..n-1) by splitting into `parts` contiguous chunks and combining
// them pairwise in a fixed tree order, so the result is bit-stable for a
// fixed chunk count.
Eigen::MatrixXd chunked_sum(long n, int parts, int d,
                            const std::function<void(long, long, Eigen::MatrixXd&)>& accumulate) {
    parts = static_cast<int>(std::max<long>(1, std::min<long>(parts, std::max<long>(n, 1))));
    std::vector<Eigen::MatrixXd> partials;
    partials.reserve(static_cast<std::size_t>(parts));
    for (int p = 0; p < parts; ++p) {
        const long lo = n * p / parts;
        const long hi = n * (p + 1) / parts;
        Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
        accumulate(lo, hi, acc);
        partials.push_back(std::move(acc));
    }
    while (partials.size() > 1) {
        std::vector<Eigen::MatrixXd> next;
        next.reserve(partials.size() / 2 + 1);
        for (std::size_t i = 0; i + 1 < partials.size(); i += 2)
            next.push_back(partials[i] + partials[i + 1]);
        if (partials.size() % 2) next.push_back(partials.back());
        partials = std::move(next);
    }
    return partials.front();
}

FaceResult subspace_from_second_moment(const Eigen::MatrixXd& M, int k) {
    const SymEigen eig = sym_eigen(M);
    const int d = static_cast<int>(M.rows());
    Eigen::MatrixXd Q = eig.eigenvectors.leftCols(k);
    Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(d, d) - Q * Q.transpose();
    return FaceResult{FairMetric(std::move(sigma), MetricMethod::face, k),
                      make_sensitive_subspace(std::move(Q))};
}

} // namespace

SensitiveSubspace make_sensitive_subspace(Eigen::MatrixXd basis) {
    if (basis.cols() < 1 || basis.rows() < basis.cols())
        throw validation_error("SensitiveSubspace: basis must be d x k with 1 <= k <= d");
    const Eigen::MatrixXd gram = basis.transpose() * basis;
    const double defect =
        (gram - Eigen::MatrixXd::Identity(basis.cols(), basis.cols())).norm();
    if (defect > 1e-8)
        throw validation_error("SensitiveSubspace: columns are not orthonormal (defect " +
                               std::to_string(defect) + ")");
    const int k = static_cast<int>(basis.cols());
    return SensitiveSubspace{std::move(basis), k};
}

Eigen::MatrixXd centering_matrix(int m) {
    if (m < 1) throw validation_error("centering_matrix: size must be at least 1");
    return Eigen::MatrixXd::Identity(m, m) -
           Eigen::MatrixXd::Constant(m, m, 1.0 / static_cast<double>(m));
}

FaceResult face_fit(const EmbeddingTable& embeddings, const ComparableGroups& groups, int k,
                    const FaceOptions& options) {
    const int d = embeddings.dim();
    if (k < 1) throw validation_error("face_fit: k must be positive");
    if (k >= d)
        throw validation_error("face_fit: k = " + std::to_string(k) +
                               " must be smaller than the embedding dimension " + std::to_string(d));

    std::vector<const std::vector<int>*> usable;
    long total_rows = 0;
    for (const auto& group : groups.groups) {
        if (group.size() < 2) {
            log::warn("face_fit: skipping singleton group (no within-group variation)");
            continue;
        }
        usable.push_back(&group);
        total_rows += static_cast<long>(group.size());
    }
    if (usable.empty())
        throw validation_error("face_fit: no within-group variation (all groups are singletons)");
    if (total_rows < k)
        throw validation_error("face_fit: only " + std::to_string(total_rows) +
                               " centered rows for k = " + std::to_string(k));

    // Pooled centered second-moment matrix over all usable groups, normalized
    // by the total number of rows. Cheaper than stacking when n >> d; the
    // stacked-SVD route gives the same eigenvectors.
    const Eigen::MatrixXd pooled = chunked_sum(
        static_cast<long>(usable.size()), options.partition_count, d,
        [&](long lo, long hi, Eigen::MatrixXd& acc) {
            for (long g = lo; g < hi; ++g) {
                const auto& group = *usable[static_cast<std::size_t>(g)];
                Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
                for (int idx : group) mean += embeddings.row(idx);
                mean /= static_cast<double>(group.size());
                for (int idx : group) {
                    const Eigen::VectorXd c = embeddings.row(idx) - mean;
                    acc.noalias() += c * c.transpose();
                }
            }
        });
    return subspace_from_second_moment(pooled / static_cast<double>(total_rows), k);
}

FaceResult face_fit_pairs(const EmbeddingTable& embeddings,
                          const std::vector<std::pair<int, int>>& pairs, int k,
                          const FaceOptions& options) {
    const int d = embeddings.dim();
    if (k < 1) throw validation_error("face_fit_pairs: k must be positive");
    if (k >= d)
        throw validation_error("face_fit_pairs: k = " + std::to_string(k) +
                               " must be smaller than the embedding dimension " + std::to_string(d));
    if (pairs.empty()) throw validation_error("face_fit_pairs: empty pair list");
    for (const auto& [a, b] : pairs)
        if (a < 0 || a >= embeddings.size() || b < 0 || b >= embeddings.size())
            throw validation_error("face_fit_pairs: pair index out of range");

    const Eigen::MatrixXd second_moment = chunked_sum(
        static_cast<long>(pairs.size()), options.partition_count, d,
        [&](long lo, long hi, Eigen::MatrixXd& acc) {
            for (long i = lo; i < hi; ++i) {
                const auto& [a, b] = pairs[static_cast<std::size_t>(i)];
                const Eigen::VectorXd z = embeddings.row(a) - embeddings.row(b);
                acc.noalias() += z * z.transpose();
            }
        });
    return subspace_from_second_moment(second_moment / static_cast<double>(pairs.size()), k);
}

double subspace_error(const SensitiveSubspace& estimated, const SensitiveSubspace& truth) {
    if (estimated.basis.rows() != truth.basis.rows())
        throw validation_error("subspace_error: ambient dims " +
                               std::to_string(estimated.basis.rows()) + " and " +
                               std::to_string(truth.basis.rows()) + " differ");
    if (estimated.k != truth.k)
        throw validation_error("subspace_error: subspace dims " + std::to_string(estimated.k) +
                               " and " + std::to_string(truth.k) + " differ");
    const Eigen::MatrixXd diff = estimated.basis * estimated.basis.transpose() -
                                 truth.basis * truth.basis.transpose();
    return op_norm(diff);
}

} // namespace fairdist
