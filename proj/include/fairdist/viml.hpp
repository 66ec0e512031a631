#ifndef FAIRDIST_VIML_HPP
#define FAIRDIST_VIML_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fairdist/comparisons.hpp"
#include "fairdist/embeddings.hpp"
#include "fairdist/metric.hpp"

namespace fairdist {

// Response link, stored as the probability of a comparable label at squared
// distance t >= 0. Must be nonincreasing in t; checked on a 1000-point grid
// at construction.
class LinkFunction {
public:
    static LinkFunction logistic();                      // 1 / (1 + e^t)
    static LinkFunction scaled_logistic(double epsilon); // (2 - eps) / (1 + e^t)
    static LinkFunction probit();                        // Phi(-t)
    // Piecewise-linear interpolation of (t, probability) knots, clamped
    // outside the knot range.
    static LinkFunction table(std::vector<std::pair<double, double>> knots);
    static LinkFunction table_from_file(const std::string& path);
    // "logistic" | "scaled:<eps>" | "probit" | "table:<path>"
    static LinkFunction parse(const std::string& spec);

    double prob(double t) const { return fn_(t); }
    const std::string& name() const { return name_; }

private:
    LinkFunction(std::string name, std::function<double(double)> fn);
    std::string name_;
    std::function<double(double)> fn_;
};

enum class ViMethod { sg, seg };
enum class ViAveraging { none, uniform, geometric };
enum class ViStepSchedule { constant, inv_sqrt };

struct VISolverConfig {
    ViMethod method = ViMethod::seg;
    double step = 0.1;
    ViStepSchedule schedule = ViStepSchedule::constant;
    ViAveraging averaging = ViAveraging::uniform;
    double beta = 0.9;       // geometric averaging weight
    long iterations = 2000;
    int batch_size = 64;
    std::uint64_t seed = 0;
    double radius = 1.0;     // ball radius for the restricted merit diagnostic
    long checkpoint_every = 0;  // 0 picks iterations/20
    int merit_samples = 32;
};

void validate(const VISolverConfig& config);

// Score map M_n(Sigma) = (1/n) sum (y_i - link(x_i' Sigma x_i)) x_i x_i'.
// Monotone whenever the link is nonincreasing; vanishes in expectation at the
// data-generating metric.
Eigen::MatrixXd score(const FairMetric& metric, const EmbeddingTable& embeddings,
                      const ComparisonTriplets& batch, const LinkFunction& link);

// Projected update Sigma <- ProjPSD(Sigma - eta * M_n(Sigma)). Moving against
// the score is likelihood ascent for the logistic link.
Eigen::MatrixXd sg_step(const Eigen::MatrixXd& sigma, const EmbeddingTable& embeddings,
                        const ComparisonTriplets& batch, const LinkFunction& link, double eta);

// Extra-gradient: a look-ahead half-step with the first batch, then the full
// step taken from the original point with the score at the half-point.
Eigen::MatrixXd seg_step(const Eigen::MatrixXd& sigma, const EmbeddingTable& embeddings,
                         const ComparisonTriplets& batch1, const ComparisonTriplets& batch2,
                         const LinkFunction& link, double eta);

// Step-weighted average of an iterate history: sum eta_s x_s / sum eta_s for
// uniform, the online recursion xbar <- (1-beta) x + beta xbar for geometric
// (initialized at the first iterate), the last iterate for none. The result
// is symmetrized and PSD-projected.
FairMetric averaged_iterate(const std::vector<std::pair<Eigen::MatrixXd, double>>& history,
                            ViAveraging averaging, double beta = 0.9);

struct ViCheckpoint {
    long iter;
    double residual;
    double merit_mc;
    double min_eig;
};

struct ViResult {
    FairMetric metric;
    std::vector<ViCheckpoint> log;
};

// Solves the empirical variational inequality by stochastic gradient or
// stochastic extra-gradient with iterate averaging. Minibatches are drawn
// without replacement within an epoch; fixed seed gives bit-identical runs.
ViResult viml_fit(const EmbeddingTable& embeddings, const ComparisonTriplets& data,
                  const LinkFunction& link, const VISolverConfig& config);

// Natural residual ||Sigma - ProjPSD(Sigma - eta M_n(Sigma))||_F / eta:
// zero exactly at solutions of the empirical VI, equal to ||M_n||_F at
// interior points.
double residual(const FairMetric& metric, const EmbeddingTable& embeddings,
                const ComparisonTriplets& data, const LinkFunction& link, double eta);

// Monte Carlo lower bound on the merit function restricted to the PSD cone
// intersected with a Frobenius ball of radius R around the queried point:
// max over sampled feasible y of <M_n(y), Sigma - y>, clamped at zero.
double restricted_merit_mc(const FairMetric& metric, const EmbeddingTable& embeddings,
                           const ComparisonTriplets& data, const LinkFunction& link,
                           double radius, int samples, std::uint64_t seed = 0);

namespace detail {
Eigen::MatrixXd score_raw(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& X,
                          const std::vector<int>& labels, const std::vector<int>& batch,
                          const LinkFunction& link);
} // namespace detail

} // namespace fairdist

#endif
