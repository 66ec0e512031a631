#include "fairdist/metric.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "fairdist/errors.hpp"
#include "fairdist/logging.hpp"

#include <nlohmann/json.hpp>

namespace fairdist {

namespace {

void require_square(const Eigen::MatrixXd& S, const char* who) {
    if (S.rows() != S.cols() || S.rows() == 0)
        throw validation_error(std::string(who) + ": expected a nonempty square matrix, got " +
                               std::to_string(S.rows()) + "x" + std::to_string(S.cols()));
}

void require_finite(const Eigen::MatrixXd& S, const char* who) {
    if (!S.allFinite())
        throw validation_error(std::string(who) + ": matrix has non-finite entries");
}

Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& S) {
    return 0.5 * (S + S.transpose());
}

} // namespace

std::string to_string(MetricMethod m) {
    switch (m) {
        case MetricMethod::identity: return "identity";
        case MetricMethod::face: return "face";
        case MetricMethod::explore: return "explore";
        case MetricMethod::viml: return "viml";
        case MetricMethod::external: return "external";
    }
    return "external";
}

MetricMethod metric_method_from_string(const std::string& name) {
    if (name == "identity") return MetricMethod::identity;
    if (name == "face") return MetricMethod::face;
    if (name == "explore") return MetricMethod::explore;
    if (name == "viml") return MetricMethod::viml;
    if (name == "external") return MetricMethod::external;
    throw validation_error("unknown metric method: " + name);
}

SymEigen sym_eigen(const Eigen::MatrixXd& S) {
    require_square(S, "sym_eigen");
    require_finite(S, "sym_eigen");
    const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
    if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw validation_error("sym_eigen: input is not symmetric within 1e-10");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(symmetrize(S));
    if (solver.info() != Eigen::Success)
        throw numeric_error("sym_eigen: eigendecomposition failed to converge");
    // Eigen returns nondecreasing order; flip to nonincreasing.
    const auto n = S.rows();
    SymEigen out;
    out.eigenvalues = solver.eigenvalues().reverse();
    out.eigenvectors.resize(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        out.eigenvectors.col(j) = solver.eigenvectors().col(n - 1 - j);
    return out;
}

Eigen::MatrixXd proj_psd(const Eigen::MatrixXd& S) {
    require_square(S, "proj_psd");
    require_finite(S, "proj_psd");
    const SymEigen eig = sym_eigen(symmetrize(S));
    if (eig.eigenvalues.minCoeff() >= 0.0) return symmetrize(S);
    const Eigen::VectorXd clamped = eig.eigenvalues.cwiseMax(0.0);
    return symmetrize(eig.eigenvectors * clamped.asDiagonal() * eig.eigenvectors.transpose());
}

double op_norm(const Eigen::MatrixXd& S) {
    const SymEigen eig = sym_eigen(S);
    return eig.eigenvalues.cwiseAbs().maxCoeff();
}

FairMetric::FairMetric(Eigen::MatrixXd sigma, MetricMethod method,
                       std::optional<int> rank_hint)
    : sigma_(std::move(sigma)), method_(method), rank_hint_(rank_hint) {
    require_square(sigma_, "FairMetric");
    require_finite(sigma_, "FairMetric");
    sigma_ = symmetrize(sigma_);

    const SymEigen eig = sym_eigen(sigma_);
    const double lambda_max = eig.eigenvalues.maxCoeff();
    const double lambda_min = eig.eigenvalues.minCoeff();
    const double tol = 1e-8 * std::max(lambda_max, 1.0);
    if (lambda_min < -tol)
        throw validation_error("FairMetric: matrix is not PSD (min eigenvalue " +
                               std::to_string(lambda_min) + ", tolerance " + std::to_string(-tol) + ")");
    if (lambda_min < 0.0) {
        const Eigen::VectorXd clamped = eig.eigenvalues.cwiseMax(0.0);
        sigma_ = symmetrize(eig.eigenvectors * clamped.asDiagonal() * eig.eigenvectors.transpose());
    }

    if (method_ == MetricMethod::face) {
        if (!rank_hint_)
            throw validation_error("FairMetric: face metrics require the projected-out rank k");
        const double proj_defect = (sigma_ * sigma_ - sigma_).norm();
        if (proj_defect > 1e-8)
            throw validation_error("FairMetric: face metric is not an orthogonal projector "
                                   "(||S^2 - S||_F = " + std::to_string(proj_defect) + ")");
        const double expected_trace = static_cast<double>(dim() - *rank_hint_);
        if (std::abs(sigma_.trace() - expected_trace) > 1e-6)
            throw validation_error("FairMetric: face metric trace " + std::to_string(sigma_.trace()) +
                                   " does not match d - k = " + std::to_string(expected_trace));
    }
}

FairMetric FairMetric::identity(int dim) {
    if (dim <= 0) throw validation_error("FairMetric::identity: dim must be positive");
    return FairMetric(Eigen::MatrixXd::Identity(dim, dim), MetricMethod::identity);
}

double FairMetric::distance(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) const {
    if (x1.size() != dim() || x2.size() != dim())
        throw validation_error("distance: vector dims " + std::to_string(x1.size()) + " and " +
                               std::to_string(x2.size()) + " do not match metric dim " +
                               std::to_string(dim()));
    const Eigen::VectorXd diff = x1 - x2;
    return diff.dot(sigma_ * diff);
}

double distance(const FairMetric& metric, const Eigen::VectorXd& x1, const Eigen::VectorXd& x2) {
    return metric.distance(x1, x2);
}

FairMetric project_out_direction(const FairMetric& metric, const Eigen::VectorXd& v) {
    if (v.size() != metric.dim())
        throw validation_error("project_out_direction: vector dim " + std::to_string(v.size()) +
                               " does not match metric dim " + std::to_string(metric.dim()));
    const double norm2 = v.squaredNorm();
    if (!(norm2 > 0.0))
        throw validation_error("project_out_direction: direction vector is zero");
    const Eigen::MatrixXd P =
        Eigen::MatrixXd::Identity(metric.dim(), metric.dim()) - (v * v.transpose()) / norm2;
    const Eigen::MatrixXd composed = P * metric.matrix() * P;

    // The composition generally breaks projector structure, so face/identity
    // provenance cannot be carried over blindly. Keep "face" only when the
    // result is still a projector (v inside or orthogonal to the removed
    // subspace); otherwise the result is a derived metric.
    MetricMethod method = metric.method();
    std::optional<int> k = metric.rank_hint();
    if (method == MetricMethod::face || method == MetricMethod::identity) {
        if ((composed * composed - composed).norm() <= 1e-8) {
            method = MetricMethod::face;
            k = metric.dim() - static_cast<int>(std::lround(composed.trace()));
        } else {
            method = MetricMethod::external;
            k = std::nullopt;
        }
    }
    return FairMetric(composed, method, k);
}

std::string format_double(double value) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), value);
    if (res.ec != std::errc())
        throw numeric_error("format_double: conversion failed");
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double value = 0.0;
    const char* begin = text.data();
    const char* end = begin + text.size();
    auto res = std::from_chars(begin, end, value);
    if (res.ec != std::errc() || res.ptr != end)
        throw validation_error("not a number: '" + text + "'");
    return value;
}

void save_metric(const FairMetric& metric, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("save_metric: cannot open " + path);
    const int d = metric.dim();
    out << d << '\n';
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            if (j) out << ' ';
            out << format_double(metric.matrix()(i, j));
        }
        out << '\n';
    }
    if (!out) throw numeric_error("save_metric: write failed for " + path);

    nlohmann::json meta;
    meta["method"] = to_string(metric.method());
    meta["dim"] = d;
    if (metric.rank_hint()) meta["k"] = *metric.rank_hint();
    std::ofstream side(path + ".meta.json");
    if (!side) throw validation_error("save_metric: cannot open " + path + ".meta.json");
    side << meta.dump(2) << '\n';
}

FairMetric load_metric(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("load_metric: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw validation_error("load_metric: empty file " + path);
    int d = 0;
    try {
        d = std::stoi(line);
    } catch (const std::exception&) {
        throw validation_error("load_metric: first line of " + path + " must be the dimension");
    }
    if (d <= 0) throw validation_error("load_metric: dimension must be positive in " + path);

    Eigen::MatrixXd S(d, d);
    for (int i = 0; i < d; ++i) {
        if (!std::getline(in, line))
            throw validation_error("load_metric: " + path + " ends early at row " + std::to_string(i + 1));
        std::istringstream row(line);
        std::string field;
        for (int j = 0; j < d; ++j) {
            if (!(row >> field))
                throw validation_error("load_metric: row " + std::to_string(i + 1) + " of " + path +
                                       " has fewer than " + std::to_string(d) + " values");
            S(i, j) = parse_double(field);
        }
        std::string extra;
        if (row >> extra)
            throw validation_error("load_metric: row " + std::to_string(i + 1) + " of " + path +
                                   " has more than " + std::to_string(d) + " values");
    }

    MetricMethod method = MetricMethod::external;
    std::optional<int> k;
    std::ifstream side(path + ".meta.json");
    if (side) {
        try {
            nlohmann::json meta = nlohmann::json::parse(side);
            if (meta.contains("method")) method = metric_method_from_string(meta["method"]);
            if (meta.contains("k") && !meta["k"].is_null()) k = meta["k"].get<int>();
            if (meta.contains("dim") && meta["dim"].get<int>() != d)
                throw validation_error("load_metric: sidecar dim disagrees with " + path);
        } catch (const nlohmann::json::exception& e) {
            throw validation_error("load_metric: bad sidecar for " + path + ": " + e.what());
        }
    }
    return FairMetric(std::move(S), method, k);
}

} // namespace fairdist
