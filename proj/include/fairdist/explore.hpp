#ifndef FAIRDIST_EXPLORE_HPP
#define FAIRDIST_EXPLORE_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "fairdist/comparisons.hpp"
#include "fairdist/embeddings.hpp"
#include "fairdist/metric.hpp"

namespace fairdist {

enum class ExploreInit { identity_scaled, zero };

struct ExploreConfig {
    double epsilon = 0.01;   // identifiability slack; 0 recovers the factor-2 model
    double step0 = 0.1;      // step schedule is step0 / sqrt(1 + t), t counting minibatches
    int batch_size = 64;
    int epochs = 50;
    std::uint64_t seed = 0;
    ExploreInit init = ExploreInit::identity_scaled;
    std::optional<double> lambda_max;  // optional cap on op_norm of the iterates
    // Called with every iterate after projection; used by tests, may be empty.
    std::function<void(const Eigen::MatrixXd&)> iterate_observer;
};

void validate(const ExploreConfig& config);

// Probability that a pair at squared distance t is labeled comparable:
// (2 - epsilon) / (1 + e^t). Strictly decreasing, range (0, 2 - epsilon);
// stays below 1 for t >= 0.
double scaled_link(double t, double epsilon);

// Average log-likelihood of the triplets under the scaled-logistic response
// model at the given metric. Requires a PSD metric; with epsilon = 0 a
// comparable-labeled pair at distance exactly 0... is fine, but an
// incomparable label at distance 0 makes the likelihood -inf and is an error.
double log_likelihood(const FairMetric& metric, const EmbeddingTable& embeddings,
                      const ComparisonTriplets& data, double epsilon);

// d ell / d Sigma: a symmetric weighted sum of rank-one matrices x x'. The
// empty batch yields the zero matrix.
Eigen::MatrixXd grad_log_likelihood(const FairMetric& metric, const EmbeddingTable& embeddings,
                                    const ComparisonTriplets& batch, double epsilon);

struct EpochRecord {
    int epoch;        // 1-based
    double loglik;    // full-data average log-likelihood after the epoch
    double grad_norm; // Frobenius norm of the full-data gradient
    double min_eig;   // smallest eigenvalue of the iterate
};

struct ExploreResult {
    FairMetric metric;
    std::vector<EpochRecord> log;
};

// Maximum-likelihood fit by minibatch projected SGD on the PSD cone:
// Sigma <- ProjPSD(Sigma + eta * grad). Deterministic for a fixed seed.
ExploreResult explore_fit(const EmbeddingTable& embeddings, const ComparisonTriplets& data,
                          const ExploreConfig& config);

namespace detail {
// Raw-matrix versions used by the fit loop and by viml's cross-checks.
// X holds the pair differences row-wise; labels in {0,1}.
double log_likelihood_raw(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& X,
                          const std::vector<int>& labels, double epsilon);
Eigen::MatrixXd grad_raw(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& X,
                         const std::vector<int>& labels, const std::vector<int>& batch,
                         double epsilon);
Eigen::MatrixXd pair_differences(const EmbeddingTable& embeddings,
                                 const ComparisonTriplets& data);
} // namespace detail

} // namespace fairdist

#endif
