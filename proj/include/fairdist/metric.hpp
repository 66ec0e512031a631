#ifndef FAIRDIST_METRIC_HPP
#define FAIRDIST_METRIC_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace fairdist {

// How a metric was obtained. Affects validation (face metrics must be
// orthogonal projectors) and is persisted in the sidecar file.
enum class MetricMethod { identity, face, explore, viml, external };

std::string to_string(MetricMethod m);
MetricMethod metric_method_from_string(const std::string& name);

// Symmetric eigendecomposition, eigenvalues in nonincreasing order,
// eigenvectors as orthonormal columns.
struct SymEigen {
    Eigen::VectorXd eigenvalues;
    Eigen::MatrixXd eigenvectors;
};

// Eigendecomposition of a symmetric matrix. Input must be symmetric within
// 1e-10 (it is symmetrized before factoring); non-finite entries are an error.
SymEigen sym_eigen(const Eigen::MatrixXd& S);

// Frobenius-nearest PSD matrix: negative eigenvalues clamped to zero.
Eigen::MatrixXd proj_psd(const Eigen::MatrixXd& S);

// Operator norm of a symmetric matrix, i.e. max |eigenvalue|.
double op_norm(const Eigen::MatrixXd& S);

// Squared Mahalanobis-form distance (x1-x2)' Sigma (x1-x2). Note this is the
// squared form; callers wanting a norm take the square root themselves.
class FairMetric {
public:
    // Symmetrizes via (S+S')/2, then checks PSD-ness: eigenvalues in
    // [-1e-8 * max(lambda_max, 1), 0) are clamped to zero, anything lower is
    // rejected. method == face additionally requires an orthogonal projector
    // of corank rank_hint.
    FairMetric(Eigen::MatrixXd sigma, MetricMethod method,
               std::optional<int> rank_hint = std::nullopt);

    static FairMetric identity(int dim);

    int dim() const { return static_cast<int>(sigma_.rows()); }
    const Eigen::MatrixXd& matrix() const { return sigma_; }
    MetricMethod method() const { return method_; }
    std::optional<int> rank_hint() const { return rank_hint_; }

    double distance(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) const;

private:
    Eigen::MatrixXd sigma_;
    MetricMethod method_;
    std::optional<int> rank_hint_;
};

double distance(const FairMetric& metric, const Eigen::VectorXd& x1,
                const Eigen::VectorXd& x2);

// Sigma <- (I - P_v) Sigma (I - P_v): the returned metric annihilates v.
FairMetric project_out_direction(const FairMetric& metric, const Eigen::VectorXd& v);

// Shortest-round-trip decimal formatting (used by every text format we write).
std::string format_double(double value);
double parse_double(const std::string& text);

// Metric file: line 1 is d, then d lines of d space-separated floats
// (row-major). A JSON sidecar <path>.meta.json carries {method, k, dim}.
void save_metric(const FairMetric& metric, const std::string& path);
FairMetric load_metric(const std::string& path);

} // namespace fairdist

#endif
