#ifndef FAIRDIST_WEAT_HPP
#define FAIRDIST_WEAT_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairdist/embeddings.hpp"
#include "fairdist/metric.hpp"

namespace fairdist {

// One association test: two equal-size target word sets, two attribute word
// sets, and the metric defining the inner product.
struct WeatSpec {
    std::string name = "weat";
    std::vector<Eigen::VectorXd> targets_x;
    std::vector<Eigen::VectorXd> targets_y;
    std::vector<Eigen::VectorXd> attributes_a;
    std::vector<Eigen::VectorXd> attributes_b;
    FairMetric metric;
};

// Resolves tokens against the table. Target tokens that do not resolve are
// dropped pairwise from X and Y (preserving equal size) with a warning;
// attribute tokens are dropped individually. X and Y must be disjoint.
WeatSpec make_weat_spec(std::string name, const EmbeddingTable& table,
                        const std::vector<std::string>& x_tokens,
                        const std::vector<std::string>& y_tokens,
                        const std::vector<std::string>& a_tokens,
                        const std::vector<std::string>& b_tokens, FairMetric metric);

// Cosine similarity under the metric inner product <x, y> = x' Sigma y.
// Errors if either vector is annihilated by the metric (its norm vanishes).
double metric_cosine(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                     const FairMetric& metric);

// s(x, A, B): mean metric-cosine of x to A minus mean metric-cosine to B.
double word_association(const Eigen::VectorXd& x, std::span<const Eigen::VectorXd> a,
                        std::span<const Eigen::VectorXd> b, const FairMetric& metric);

// Mean of word_association over the set.
double set_association(std::span<const Eigen::VectorXd> x, std::span<const Eigen::VectorXd> a,
                       std::span<const Eigen::VectorXd> b, const FairMetric& metric);

// |s(X, A, B) - s(Y, A, B)|: nonnegative, symmetric in X and Y.
double test_statistic(std::span<const Eigen::VectorXd> x, std::span<const Eigen::VectorXd> y,
                      std::span<const Eigen::VectorXd> a, std::span<const Eigen::VectorXd> b,
                      const FairMetric& metric);

struct WeatOptions {
    long long max_partitions = 50000;  // exact when C(2m, m) fits, else subsample
    std::uint64_t seed = 0;
    bool midp = false;  // count ties at half weight instead of excluding them
    int chunks = 1;     // evaluation chunks; counts are summed deterministically
};

struct PermutationResult {
    double p_value = 0.0;
    long long evaluated = 0;
    bool exact = false;
};

// Two-sided permutation p-value over equal-size bipartitions of X u Y: the
// fraction of partitions whose statistic strictly exceeds the observed one.
// All C(2m, m) partitions are enumerated when that count is within
// max_partitions; otherwise max_partitions partitions are sampled uniformly
// with replacement under the seed.
PermutationResult permutation_p_value(const WeatSpec& spec, const WeatOptions& options = {});
PermutationResult permutation_p_value(const WeatSpec& spec, long long max_partitions,
                                      std::uint64_t seed);

// Observed statistic standardized by the population SD (divide by N) of the
// per-word associations over X u Y. Errors when the spread is zero.
double effect_size(const WeatSpec& spec);

struct WeatReport {
    std::string test_name;
    double statistic = 0.0;
    double p_value = 0.0;
    double effect_size = 0.0;
    long long partitions_evaluated = 0;
    bool exact = false;
};

WeatReport run_weat(const WeatSpec& spec, const WeatOptions& options = {});

std::string weat_report_json(const WeatReport& report);
// Aligned plain-text table with the P and d columns.
std::string weat_report_table(std::span<const WeatReport> reports);

} // namespace fairdist

#endif
