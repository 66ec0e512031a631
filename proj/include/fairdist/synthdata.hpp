#ifndef FAIRDIST_SYNTHDATA_HPP
#define FAIRDIST_SYNTHDATA_HPP

#include <cstdint>
#include <functional>

#include "fairdist/comparisons.hpp"
#include "fairdist/embeddings.hpp"
#include "fairdist/face.hpp"
#include "fairdist/metric.hpp"

namespace fairdist {

enum class LatentDist { gaussian, rademacher_mixture };

// Planted factor model: observations are A* mu + B* nu + noise (+ mean for
// group data), with isotropic unit-variance latents. The sensitive-dominance
// condition lambda_min(A*'A*) > ||B*B*' + sigma^2 I||_op is a warning, not an
// error, so misspecified models can be generated for negative tests.
struct FactorModelSpec {
    int d = 0;  // ambient dimension
    int k = 0;  // sensitive factors (columns of A_star; may be 0)
    int l = 0;  // relevant factors (columns of B_star; may be 0)
    Eigen::MatrixXd A_star;  // d x k
    Eigen::MatrixXd B_star;  // d x l
    double sigma = 0.0;      // isotropic noise SD
    Eigen::VectorXd mean;    // group data only; empty means zero
    LatentDist latent = LatentDist::gaussian;
};

void validate(const FactorModelSpec& spec);

// Smallest eigenvalue of A*'A* (the sensitive block restricted to its range)
// and the loudest competing variation ||B*B*' + sigma^2 I||_op.
double sensitive_floor(const FactorModelSpec& spec);
double nuisance_op_norm(const FactorModelSpec& spec);

// Random planted spec: A* and B* get orthonormal columns scaled so that
// lambda_min(A*'A*) = lambda_a and ||B*B*'||_op = lambda_b.
FactorModelSpec make_planted_spec(int d, int k, int l, double lambda_a, double lambda_b,
                                  double sigma, std::uint64_t seed);

// Orthonormal basis of ran(A*), for subspace-error comparisons.
SensitiveSubspace planted_subspace(const FactorModelSpec& spec);

// n pair-difference vectors z = A* mu + B* nu + w, tokens "z000000"...
EmbeddingTable gen_pair_differences(const FactorModelSpec& spec, int n, std::uint64_t seed);

// n group observations phi = mean + A* mu + B* nu + eps, tokens "g000000"...
EmbeddingTable gen_group(const FactorModelSpec& spec, int n, std::uint64_t seed);

// Splits each difference row z into the consecutive pair (+z/2, -z/2) so the
// differences can be expressed as token pairs; rows 2i and 2i+1 form pair i.
EmbeddingTable pair_table_from_differences(const EmbeddingTable& differences);

// Labels for consecutive-row pairs of the table under the scaled-logistic
// response model at the ground-truth metric.
ComparisonTriplets gen_binary_response(const EmbeddingTable& pairs, const FairMetric& sigma0,
                                       double epsilon, std::uint64_t seed);

// Same, with an arbitrary probability-of-distance response.
ComparisonTriplets gen_binary_response(const EmbeddingTable& pairs, const FairMetric& sigma0,
                                       const std::function<double(double)>& prob,
                                       std::uint64_t seed);

// Subspace-estimation error bound pieces: bias floor b, eigengap, the
// finite-sample estimation term at (n, t), and their combination
// b + (delta v delta^2) / (eigengap - (delta v delta^2)).
struct BoundQuantities {
    double b = 0.0;
    double gamma_tilde = 0.0;
    double delta = 0.0;
    double total = 0.0;
};

// The constant C multiplying sqrt(d) is not pinned by theory; it defaults
// to 1 and the bound is treated as an envelope.
BoundQuantities theoretical_bound(const FactorModelSpec& spec, long n, double t, double C = 1.0);

} // namespace fairdist

#endif
