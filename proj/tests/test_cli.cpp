#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fairdist/metric.hpp"

namespace fs = std::filesystem;

namespace {

#ifndef FAIRDIST_CLI_PATH
#error "FAIRDIST_CLI_PATH must be defined"
#endif

const std::string cli = FAIRDIST_CLI_PATH;

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() / ("fairdist_cli_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

int run(const std::string& args, const std::string& stdout_path = "/dev/null") {
    const std::string cmd = cli + " " + args + " > " + stdout_path + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

nlohmann::json slurp_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

} // namespace

TEST_CASE("usage errors exit with code 2") {
    TempDir dir;
    CHECK(run("face --embeddings nope.emb --output o.metric") == 2);  // --k missing
    write(dir.file("v.emb"), "a 1 0\nb 0 1\nc 1 1\n");
    write(dir.file("g.txt"), "a b\n");
    write(dir.file("p.csv"), "a,b\n");
    CHECK(run("face --embeddings " + dir.file("v.emb") + " --groups " + dir.file("g.txt") +
              " --pairs " + dir.file("p.csv") + " --k 1 --output " + dir.file("o.metric")) == 2);
    CHECK(run("face --embeddings " + dir.file("v.emb") + " --k 1 --output " +
              dir.file("o.metric")) == 2);  // neither groups nor pairs
    CHECK(run("explore --embeddings " + dir.file("v.emb") + " --triplets t.csv --epsilon 1.5 " +
              "--output " + dir.file("o.metric")) == 2);
    CHECK(run("nonsense") == 2);
    CHECK(run("--version") == 0);
}

TEST_CASE("simulate then face: output metric satisfies the projector contract") {
    TempDir dir;
    const std::string prefix = dir.file("sim");
    CHECK(run("simulate --mode pairs --d 8 --k 2 --l 2 --n 400 --lambda-a 16 --lambda-b 0.5 "
              "--sigma 0.5 --seed 3 --output " + prefix) == 0);
    CHECK(run("face --embeddings " + prefix + ".emb --pairs " + prefix + ".pairs.csv " +
              "--k 2 --output " + dir.file("face.metric")) == 0);

    const auto metric = fairdist::load_metric(dir.file("face.metric"));
    CHECK(metric.method() == fairdist::MetricMethod::face);
    CHECK(metric.rank_hint() == 2);
    const Eigen::MatrixXd& S = metric.matrix();
    CHECK((S * S - S).norm() <= 1e-8);
    CHECK(std::abs(S.trace() - 6.0) <= 1e-6);

    // fitted close to the planted truth
    const auto truth = fairdist::load_metric(prefix + ".truth.metric");
    CHECK(fairdist::op_norm(S - truth.matrix()) <= 0.3);
}

TEST_CASE("explore run: per-epoch log exists and the final loglik does not decrease") {
    TempDir dir;
    const std::string prefix = dir.file("sim");
    CHECK(run("simulate --mode triplets --d 2 --n 2000 --sigma 1 --epsilon 0.1 --seed 5 "
              "--output " + prefix) == 0);
    CHECK(run("explore --embeddings " + prefix + ".emb --triplets " + prefix + ".triplets.csv "
              "--epsilon 0.1 --epochs 8 --seed 5 --log " + dir.file("train.jsonl") +
              " --output " + dir.file("explore.metric")) == 0);

    std::ifstream log(dir.file("train.jsonl"));
    std::string line;
    double first = 0.0, last = 0.0;
    int rows = 0;
    while (std::getline(log, line)) {
        const auto rec = nlohmann::json::parse(line);
        CHECK(rec.contains("epoch"));
        CHECK(rec.contains("loglik"));
        CHECK(rec.contains("grad_norm"));
        CHECK(rec.contains("min_eig"));
        if (rows == 0) first = rec["loglik"];
        last = rec["loglik"];
        ++rows;
    }
    CHECK(rows == 8);
    CHECK(last >= first);
    CHECK_NOTHROW(fairdist::load_metric(dir.file("explore.metric")));
}

TEST_CASE("viml run: diagnostics log with residual/merit/min_eig") {
    TempDir dir;
    const std::string prefix = dir.file("sim");
    CHECK(run("simulate --mode triplets --d 2 --n 2000 --sigma 1 --epsilon 0.0 --seed 7 "
              "--output " + prefix) == 0);
    CHECK(run("viml --embeddings " + prefix + ".emb --triplets " + prefix + ".triplets.csv "
              "--link scaled:0 --method seg --averaging uniform --step 0.05 --iters 400 "
              "--seed 7 --diagnostics " + dir.file("diag.jsonl") + " --output " +
              dir.file("viml.metric")) == 0);
    std::ifstream log(dir.file("diag.jsonl"));
    std::string line;
    int rows = 0;
    while (std::getline(log, line)) {
        const auto rec = nlohmann::json::parse(line);
        CHECK(rec.contains("iter"));
        CHECK(rec.contains("residual"));
        CHECK(rec.contains("merit_mc"));
        CHECK(rec.contains("min_eig"));
        ++rows;
    }
    CHECK(rows >= 10);
}

TEST_CASE("distance: token against itself is zero; metric defaults to identity") {
    TempDir dir;
    write(dir.file("v.emb"), "a 1 0\nb 0 1\n");
    CHECK(run("distance --embeddings " + dir.file("v.emb") + " --a a --b a",
              dir.file("out.json")) == 0);
    CHECK(slurp_json(dir.file("out.json"))["distance"].get<double>() == 0.0);

    CHECK(run("distance --embeddings " + dir.file("v.emb") + " --a a --b b",
              dir.file("out2.json")) == 0);
    CHECK(slurp_json(dir.file("out2.json"))["distance"].get<double>() == 2.0);

    CHECK(run("distance --embeddings " + dir.file("v.emb") + " --a a --b zebra") == 2);
}

TEST_CASE("bounds: the 25:1 spec reports b = 1/24 in JSON") {
    TempDir dir;
    CHECK(run("bounds --lambda-a 25 --lambda-b 0.5 --sigma 0.70710678118654752 --n 5000 --t 3",
              dir.file("b.json")) == 0);
    const auto j = slurp_json(dir.file("b.json"));
    CHECK(j["b"].get<double>() == doctest::Approx(1.0 / 24.0).epsilon(1e-9));
    CHECK(j["gamma_tilde"].get<double>() == doctest::Approx(24.5).epsilon(1e-9));
    CHECK(j.contains("delta"));
    CHECK(j.contains("total"));
}

TEST_CASE("weat: omitted metric equals an explicit identity metric") {
    TempDir dir;
    write(dir.file("v.emb"),
          "x1 1 0 0\nx2 0.9 0.1 0\ny1 0 1 0\ny2 0.1 0.9 0\na1 1 0.2 0\nb1 0.2 1 0\n");
    write(dir.file("x.txt"), "x1\nx2\n");
    write(dir.file("y.txt"), "y1\ny2\n");
    write(dir.file("a.txt"), "a1\n");
    write(dir.file("b.txt"), "b1\n");

    const fairdist::FairMetric id = fairdist::FairMetric::identity(3);
    fairdist::save_metric(id, dir.file("id.metric"));

    const std::string base = "weat --embeddings " + dir.file("v.emb") + " --x " +
                             dir.file("x.txt") + " --y " + dir.file("y.txt") + " --a " +
                             dir.file("a.txt") + " --b " + dir.file("b.txt");
    CHECK(run(base, dir.file("w1.json")) == 0);
    CHECK(run(base + " --metric " + dir.file("id.metric"), dir.file("w2.json")) == 0);
    CHECK(slurp(dir.file("w1.json")) == slurp(dir.file("w2.json")));

    CHECK(run(base + " --format table", dir.file("w.table")) == 0);
    const std::string table = slurp(dir.file("w.table"));
    CHECK(table.find("Test") != std::string::npos);
    CHECK(table.find("P") != std::string::npos);

    CHECK(run(base + " --format yaml") == 2);
}

TEST_CASE("numerical failures exit with code 3") {
    TempDir dir;
    // word annihilated by a rank-deficient metric
    write(dir.file("v.emb"), "x1 1 0\ny1 0 1\na1 1 0.1\nb1 0.1 1\n");
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(2, 2);
    mask(0, 0) = 1.0;
    fairdist::save_metric(fairdist::FairMetric(mask, fairdist::MetricMethod::external),
                          dir.file("mask.metric"));
    write(dir.file("x.txt"), "x1\n");
    write(dir.file("y.txt"), "y1\n");  // y1 = (0,1) has zero norm under diag(1,0)
    write(dir.file("a.txt"), "a1\n");
    write(dir.file("b.txt"), "b1\n");
    CHECK(run("weat --embeddings " + dir.file("v.emb") + " --x " + dir.file("x.txt") + " --y " +
              dir.file("y.txt") + " --a " + dir.file("a.txt") + " --b " + dir.file("b.txt") +
              " --metric " + dir.file("mask.metric")) == 3);
}

TEST_CASE("runs echo their resolved config to the log and report a version") {
    TempDir dir;
    const std::string cmd = cli + " bounds --lambda-a 25 --lambda-b 0.5 --sigma 0.7 --n 1000 "
                            "--t 1 > /dev/null 2> " + dir.file("stderr.txt");
    CHECK(std::system(cmd.c_str()) == 0);
    const std::string err = slurp(dir.file("stderr.txt"));
    CHECK(err.find("config bounds") != std::string::npos);
    CHECK(err.find("\"lambda_a\":25") != std::string::npos);

    CHECK(run("--version", dir.file("version.txt")) == 0);
    CHECK(slurp(dir.file("version.txt")).find("fairdist") != std::string::npos);
}

TEST_CASE("explore CLI run lands near the generating metric") {
    TempDir dir;
    const std::string prefix = dir.file("sim");
    CHECK(run("simulate --mode triplets --d 2 --n 6000 --sigma 1 --epsilon 0.1 --seed 13 "
              "--output " + prefix) == 0);
    CHECK(run("explore --embeddings " + prefix + ".emb --triplets " + prefix + ".triplets.csv "
              "--epsilon 0.1 --seed 13 --output " + dir.file("e.metric")) == 0);
    const auto fitted = fairdist::load_metric(dir.file("e.metric"));
    const auto truth = fairdist::load_metric(prefix + ".truth.metric");
    CHECK((fitted.matrix() - truth.matrix()).norm() <= 0.25);
    CHECK(fitted.method() == fairdist::MetricMethod::explore);
}

TEST_CASE("fixed seed makes every subcommand byte-reproducible") {
    TempDir dir;
    const std::string p1 = dir.file("r1"), p2 = dir.file("r2");
    const std::string gen = "simulate --mode triplets --d 3 --k 1 --l 1 --lambda-a 9 "
                            "--lambda-b 0.5 --sigma 0.5 --n 500 --epsilon 0.1 --seed 11 ";
    CHECK(run(gen + "--output " + p1) == 0);
    CHECK(run(gen + "--output " + p2) == 0);
    CHECK(slurp(p1 + ".emb") == slurp(p2 + ".emb"));
    CHECK(slurp(p1 + ".triplets.csv") == slurp(p2 + ".triplets.csv"));
    CHECK(slurp(p1 + ".truth.metric") == slurp(p2 + ".truth.metric"));

    const std::string fit = "explore --embeddings " + p1 + ".emb --triplets " + p1 +
                            ".triplets.csv --epsilon 0.1 --epochs 3 --seed 11 --output ";
    CHECK(run(fit + dir.file("e1.metric")) == 0);
    CHECK(run(fit + dir.file("e2.metric")) == 0);
    CHECK(slurp(dir.file("e1.metric")) == slurp(dir.file("e2.metric")));
}
