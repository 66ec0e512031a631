#ifndef FAIRDIST_FACE_HPP
#define FAIRDIST_FACE_HPP

#include <utility>
#include <vector>

#include "fairdist/comparisons.hpp"
#include "fairdist/embeddings.hpp"
#include "fairdist/metric.hpp"

namespace fairdist {

// Orthonormal basis of the estimated sensitive subspace.
struct SensitiveSubspace {
    Eigen::MatrixXd basis;  // d x k, orthonormal columns
    int k = 0;
};

SensitiveSubspace make_sensitive_subspace(Eigen::MatrixXd basis);

// H = I_m - (1/m) 1 1': symmetric, idempotent, annihilates constants.
Eigen::MatrixXd centering_matrix(int m);

struct FaceOptions {
    // Number of chunks for the covariance accumulation. Results are
    // bit-stable for a fixed chunk count (deterministic tree-order combine).
    int partition_count = 1;
};

struct FaceResult {
    FairMetric metric;          // I - QQ', an orthogonal projector
    SensitiveSubspace subspace; // Q
};

// Centers each comparable group, pools the centered second-moment matrix,
// and takes the top-k eigenvectors as the sensitive subspace. Singleton
// groups carry no within-group variation and are skipped with a warning.
FaceResult face_fit(const EmbeddingTable& embeddings, const ComparableGroups& groups, int k,
                    const FaceOptions& options = {});

// Pairwise specialization on differences z_i = phi_a - phi_b: eigenvectors of
// (1/n) sum z_i z_i'. Spans the same subspace as face_fit on the pairs viewed
// as two-element groups (the 1/4 rescaling does not move eigenvectors).
FaceResult face_fit_pairs(const EmbeddingTable& embeddings,
                          const std::vector<std::pair<int, int>>& pairs, int k,
                          const FaceOptions& options = {});

// ||Q1 Q1' - Q2 Q2'||_op, in [0, 1] for orthonormal bases.
double subspace_error(const SensitiveSubspace& estimated, const SensitiveSubspace& truth);

} // namespace fairdist

#endif
