#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fairdist/errors.hpp"
#include "fairdist/metric.hpp"
#include "test_support.hpp"

using namespace fairdist;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd mat2(double a, double b, double c, double d) {
    MatrixXd m(2, 2);
    m << a, b, c, d;
    return m;
}

} // namespace

TEST_CASE("distance: identity, zero, and diagonal metrics") {
    const FairMetric id = FairMetric::identity(2);
    VectorXd x1(2), x2(2);
    x1 << 1, 0;
    x2 << 0, 1;
    CHECK(distance(id, x1, x2) == doctest::Approx(2.0).epsilon(1e-14));

    const FairMetric zero(MatrixXd::Zero(2, 2), MetricMethod::external);
    CHECK(distance(zero, x1, x2) == doctest::Approx(0.0));

    const FairMetric diag(mat2(2, 0, 0, 1), MetricMethod::external);
    VectorXd a(2), b(2);
    a << 1, 1;
    b << 0, 0;
    CHECK(distance(diag, a, b) == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("distance: dimension mismatch names both dims") {
    const FairMetric id = FairMetric::identity(2);
    VectorXd bad(3);
    bad << 1, 2, 3;
    VectorXd ok(2);
    ok << 1, 2;
    try {
        distance(id, bad, ok);
        FAIL("expected a validation_error");
    } catch (const validation_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find('3') != std::string::npos);
        CHECK(msg.find('2') != std::string::npos);
    }
}

TEST_CASE("distance properties: nonnegative, zero at equal points") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int d = 2 + static_cast<int>(uniform_index(rng, 4));
        const FairMetric m(testsupport::random_psd(d, rng), MetricMethod::external);
        const VectorXd x = testsupport::random_gaussian(d, 1, rng);
        const VectorXd y = testsupport::random_gaussian(d, 1, rng);
        CHECK(distance(m, x, y) >= -1e-10);
        CHECK(distance(m, x, x) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("sym_eigen: diagonal, identity, and hand-decomposed flip matrix") {
    MatrixXd D = MatrixXd::Zero(3, 3);
    D.diagonal() << 3, 1, 2;
    const SymEigen e = sym_eigen(D);
    CHECK(e.eigenvalues(0) == doctest::Approx(3.0));
    CHECK(e.eigenvalues(1) == doctest::Approx(2.0));
    CHECK(e.eigenvalues(2) == doctest::Approx(1.0));

    const SymEigen id = sym_eigen(MatrixXd::Identity(4, 4));
    CHECK((id.eigenvalues.array() - 1.0).abs().maxCoeff() < 1e-12);

    // [[0,1],[1,0]]: eigenvalues (1,-1) with eigenvectors (1,1)/sqrt2, (1,-1)/sqrt2
    const SymEigen flip = sym_eigen(mat2(0, 1, 1, 0));
    CHECK(flip.eigenvalues(0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(flip.eigenvalues(1) == doctest::Approx(-1.0).epsilon(1e-12));
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(flip.eigenvectors(0, 0) * flip.eigenvectors(1, 0)) ==
          doctest::Approx(inv_sqrt2 * inv_sqrt2).epsilon(1e-10));
}

TEST_CASE("sym_eigen: contract invariants on random symmetric matrices") {
    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 2 + static_cast<int>(uniform_index(rng, 6));
        const MatrixXd S = testsupport::random_symmetric(d, rng);
        const SymEigen e = sym_eigen(S);
        CHECK((e.eigenvectors.transpose() * e.eigenvectors - MatrixXd::Identity(d, d)).norm() <=
              1e-8);
        const MatrixXd rec =
            e.eigenvectors * e.eigenvalues.asDiagonal() * e.eigenvectors.transpose();
        CHECK((rec - S).norm() <= 1e-8 * std::max(1.0, S.norm()));
        for (int i = 0; i + 1 < d; ++i) CHECK(e.eigenvalues(i) >= e.eigenvalues(i + 1));
    }
}

TEST_CASE("sym_eigen: rejects non-finite and asymmetric input") {
    MatrixXd bad = mat2(1, 2, 2, std::numeric_limits<double>::quiet_NaN());
    CHECK_THROWS_AS(sym_eigen(bad), validation_error);
    CHECK_THROWS_AS(sym_eigen(mat2(1, 5, 0, 1)), validation_error);
}

TEST_CASE("proj_psd: clamps the negative eigenvalue of diag(1,-1)") {
    const MatrixXd P = proj_psd(mat2(1, 0, 0, -1));
    CHECK((P - mat2(1, 0, 0, 0)).norm() < 1e-12);
}

TEST_CASE("proj_psd: fixes PSD matrices and the flip matrix maps to the half matrix") {
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const MatrixXd S = testsupport::random_psd(3, rng);
        CHECK((proj_psd(S) - S).norm() <= 1e-10);
    }
    const MatrixXd H = proj_psd(mat2(0, 1, 1, 0));
    CHECK((H - mat2(0.5, 0.5, 0.5, 0.5)).norm() < 1e-12);
}

TEST_CASE("proj_psd: idempotent") {
    Rng rng(14);
    for (int trial = 0; trial < 30; ++trial) {
        const MatrixXd S = testsupport::random_symmetric(4, rng);
        const MatrixXd P = proj_psd(S);
        CHECK((proj_psd(P) - P).norm() <= 1e-10);
    }
}

TEST_CASE("proj_psd: no PSD matrix in an exhaustive grid beats the projection") {
    // 2x2: full search over rotation angle x eigenvalue grids. 3x3: grid in
    // the input's own eigenbasis plus random rotated bases.
    Rng rng(15);
    for (int trial = 0; trial < 25; ++trial) {
        const MatrixXd S = 2.0 * testsupport::random_symmetric(2, rng);
        const double best = (S - proj_psd(S)).norm();
        const double span = S.norm() + 1.0;
        for (int ai = 0; ai < 60; ++ai) {
            const double theta = ai * 3.14159265358979 / 60.0;
            MatrixXd R(2, 2);
            R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
            for (int i = 0; i <= 24; ++i) {
                for (int j = 0; j <= 24; ++j) {
                    Eigen::Vector2d mu(span * i / 24.0, span * j / 24.0);
                    const MatrixXd Y = R * mu.asDiagonal() * R.transpose();
                    CHECK((S - Y).norm() >= best - 1e-6);
                }
            }
        }
    }
    for (int trial = 0; trial < 25; ++trial) {
        const MatrixXd S = 2.0 * testsupport::random_symmetric(3, rng);
        const double best = (S - proj_psd(S)).norm();
        const double span = S.norm() + 1.0;
        const SymEigen e = sym_eigen(S);
        auto check_basis = [&](const MatrixXd& V) {
            for (int i = 0; i <= 12; ++i)
                for (int j = 0; j <= 12; ++j)
                    for (int k = 0; k <= 12; ++k) {
                        Eigen::Vector3d mu(span * i / 12.0, span * j / 12.0, span * k / 12.0);
                        const MatrixXd Y = V * mu.asDiagonal() * V.transpose();
                        CHECK((S - Y).norm() >= best - 1e-6);
                    }
        };
        check_basis(e.eigenvectors);
        for (int r = 0; r < 8; ++r) check_basis(testsupport::random_orthogonal(3, rng));
    }
}

TEST_CASE("op_norm: hand values and the zero matrix") {
    CHECK(op_norm(mat2(3, 0, 0, -5)) == doctest::Approx(5.0));
    CHECK(op_norm(MatrixXd::Zero(3, 3)) == doctest::Approx(0.0));
    CHECK(op_norm(mat2(2, 1, 1, 2)) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("op_norm: agrees with power iteration and random unit-vector sweep") {
    Rng rng(16);
    for (int trial = 0; trial < 10; ++trial) {
        const MatrixXd S = testsupport::random_symmetric(5, rng);
        CHECK(op_norm(S) ==
              doctest::Approx(testsupport::power_iteration_op_norm(S)).epsilon(1e-9));
    }
    // 1000 random unit vectors resolve the 2x2 case to 1e-3.
    for (int trial = 0; trial < 5; ++trial) {
        MatrixXd S = testsupport::random_symmetric(2, rng);
        S /= std::max(1.0, S.norm());
        double best = 0.0;
        for (int i = 0; i < 1000; ++i) {
            VectorXd u = testsupport::random_gaussian(2, 1, rng);
            u.normalize();
            best = std::max(best, std::abs(u.dot(S * u)));
        }
        CHECK(op_norm(S) == doctest::Approx(best).epsilon(1e-3));
    }
}

TEST_CASE("project_out_direction: axis, no-op, and symmetric direction cases") {
    const FairMetric id2 = FairMetric::identity(2);
    VectorXd e1(2);
    e1 << 1, 0;
    const FairMetric dropped = project_out_direction(id2, e1);
    CHECK((dropped.matrix() - mat2(0, 0, 0, 1)).norm() < 1e-12);
    CHECK(std::abs((dropped.matrix() * e1).norm()) <= 1e-8);

    // metric already orthogonal to v stays put
    const FairMetric ortho(mat2(0, 0, 0, 1), MetricMethod::external);
    CHECK((project_out_direction(ortho, e1).matrix() - ortho.matrix()).norm() <= 1e-10);

    const FairMetric id3 = FairMetric::identity(3);
    VectorXd v(3);
    v << 1, 1, 1;
    v /= std::sqrt(3.0);
    const FairMetric proj = project_out_direction(id3, v);
    const MatrixXd expected = MatrixXd::Identity(3, 3) - v * v.transpose();
    CHECK((proj.matrix() - expected).norm() < 1e-10);
}

TEST_CASE("project_out_direction: annihilation and PSD-ness on random metrics") {
    Rng rng(17);
    for (int trial = 0; trial < 25; ++trial) {
        const int d = 3 + static_cast<int>(uniform_index(rng, 4));
        const FairMetric m(testsupport::random_psd(d, rng), MetricMethod::external);
        const VectorXd v = testsupport::random_gaussian(d, 1, rng);
        const FairMetric out = project_out_direction(m, v);
        CHECK((out.matrix() * v).norm() <= 1e-8 * std::max(1.0, v.norm()));
        CHECK(sym_eigen(out.matrix()).eigenvalues.minCoeff() >= -1e-10);
    }
    CHECK_THROWS_AS(project_out_direction(FairMetric::identity(2), VectorXd::Zero(2)),
                    validation_error);
}

TEST_CASE("FairMetric: symmetrization and PSD validation") {
    // slightly asymmetric input is symmetrized silently
    const FairMetric m(mat2(1, 0.30000000001, 0.3, 1), MetricMethod::external);
    CHECK((m.matrix() - m.matrix().transpose()).cwiseAbs().maxCoeff() <= 1e-12);

    // within-tolerance negative eigenvalue is clamped to zero
    MatrixXd near_psd = mat2(1, 0, 0, -1e-9);
    const FairMetric clamped(near_psd, MetricMethod::external);
    CHECK(sym_eigen(clamped.matrix()).eigenvalues.minCoeff() >= 0.0);

    // clearly indefinite input is rejected
    CHECK_THROWS_AS(FairMetric(mat2(1, 0, 0, -0.5), MetricMethod::external), validation_error);
}

TEST_CASE("FairMetric: face method demands a projector with the right corank") {
    MatrixXd proj = mat2(0, 0, 0, 1);
    CHECK_NOTHROW(FairMetric(proj, MetricMethod::face, 1));
    CHECK_THROWS_AS(FairMetric(proj, MetricMethod::face, std::nullopt), validation_error);
    CHECK_THROWS_AS(FairMetric(mat2(0.5, 0, 0, 1), MetricMethod::face, 1), validation_error);
    CHECK_THROWS_AS(FairMetric(proj, MetricMethod::face, 2), validation_error);
}

TEST_CASE("metric file: write/read preserves entries exactly and sidecar metadata") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "fairdist_metric_test";
    fs::create_directories(dir);
    const std::string path = (dir / "m.metric").string();

    Rng rng(18);
    const FairMetric m(testsupport::random_psd(4, rng), MetricMethod::explore);
    save_metric(m, path);
    const FairMetric back = load_metric(path);
    CHECK(back.dim() == 4);
    CHECK(back.method() == MetricMethod::explore);
    CHECK((back.matrix() - m.matrix()).cwiseAbs().maxCoeff() == 0.0);  // bit-exact

    // face metric round-trips with its k
    const FairMetric facem(mat2(0, 0, 0, 1), MetricMethod::face, 1);
    save_metric(facem, path);
    const FairMetric faceback = load_metric(path);
    CHECK(faceback.method() == MetricMethod::face);
    CHECK(faceback.rank_hint() == 1);

    // missing sidecar falls back to external
    fs::remove(path + ".meta.json");
    CHECK(load_metric(path).method() == MetricMethod::external);

    std::ofstream(path) << "2\n1 0\n";
    CHECK_THROWS_AS(load_metric(path), validation_error);
    std::ofstream(path) << "2\n1 0 0\n0 1\n";
    CHECK_THROWS_AS(load_metric(path), validation_error);
    fs::remove_all(dir);
}

TEST_CASE("format_double: shortest round-trip formatting") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.0}) {
        CHECK(parse_double(format_double(v)) == v);
    }
    CHECK(format_double(0.1) == "0.1");
    CHECK_THROWS_AS(parse_double("abc"), validation_error);
}
