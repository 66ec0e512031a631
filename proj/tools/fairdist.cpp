// fairdist: learn individual-fairness metrics from comparison data and audit
// embeddings with word-association tests.
//
// Subcommands: face, explore, viml, weat, simulate, distance, bounds.
// Exit codes: 0 success, 2 usage/validation error, 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairdist/comparisons.hpp"
#include "fairdist/embeddings.hpp"
#include "fairdist/errors.hpp"
#include "fairdist/explore.hpp"
#include "fairdist/face.hpp"
#include "fairdist/logging.hpp"
#include "fairdist/metric.hpp"
#include "fairdist/synthdata.hpp"
#include "fairdist/viml.hpp"
#include "fairdist/weat.hpp"

namespace {

constexpr const char* kVersion = "fairdist 1.0.0 (metric file v1, report json v1)";

using nlohmann::json;

void echo_config(const std::string& cmd, const json& config) {
    fairdist::log::info("config " + cmd + ": " + config.dump());
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw fairdist::validation_error("cannot open output file " + path);
    return out;
}

// ---------------------------------------------------------------------------

struct FaceArgs {
    std::string embeddings, groups, pairs, output;
    int k = 0;
    int partitions = 1;
};

void run_face(const FaceArgs& a) {
    echo_config("face", json{{"embeddings", a.embeddings},
                             {"groups", a.groups},
                             {"pairs", a.pairs},
                             {"k", a.k},
                             {"partitions", a.partitions},
                             {"output", a.output}});
    const auto table = fairdist::load_embeddings(a.embeddings);
    fairdist::FaceOptions options;
    options.partition_count = a.partitions;
    fairdist::FaceResult result = [&] {
        if (!a.groups.empty()) {
            const auto groups = fairdist::load_groups_file(table, a.groups);
            return fairdist::face_fit(table, groups, a.k, options);
        }
        const auto pairs = fairdist::load_pairs_csv(table, a.pairs);
        return fairdist::face_fit_pairs(table, pairs, a.k, options);
    }();
    fairdist::save_metric(result.metric, a.output);
    std::cout << json{{"output", a.output},
                      {"dim", result.metric.dim()},
                      {"k", a.k},
                      {"method", "face"}}
                     .dump()
              << '\n';
}

// ---------------------------------------------------------------------------

struct ExploreArgs {
    std::string embeddings, triplets, output, log_path, init = "identity_scaled";
    double epsilon = 0.01, step0 = 0.1;
    int batch = 64, epochs = 50;
    std::uint64_t seed = 0;
    std::optional<double> lambda_max;
};

void run_explore(const ExploreArgs& a) {
    echo_config("explore", json{{"embeddings", a.embeddings},
                                {"triplets", a.triplets},
                                {"epsilon", a.epsilon},
                                {"step0", a.step0},
                                {"batch", a.batch},
                                {"epochs", a.epochs},
                                {"seed", a.seed},
                                {"init", a.init},
                                {"output", a.output}});
    const auto table = fairdist::load_embeddings(a.embeddings);
    const auto data = fairdist::load_triplets_csv(table, a.triplets);
    fairdist::ExploreConfig config;
    config.epsilon = a.epsilon;
    config.step0 = a.step0;
    config.batch_size = a.batch;
    config.epochs = a.epochs;
    config.seed = a.seed;
    config.lambda_max = a.lambda_max;
    if (a.init == "identity_scaled")
        config.init = fairdist::ExploreInit::identity_scaled;
    else if (a.init == "zero")
        config.init = fairdist::ExploreInit::zero;
    else
        throw fairdist::validation_error("--init must be identity_scaled or zero");

    const auto result = fairdist::explore_fit(table, data, config);
    fairdist::save_metric(result.metric, a.output);
    if (!a.log_path.empty()) {
        auto out = open_output(a.log_path);
        for (const auto& rec : result.log)
            out << json{{"epoch", rec.epoch},
                        {"loglik", rec.loglik},
                        {"grad_norm", rec.grad_norm},
                        {"min_eig", rec.min_eig}}
                       .dump()
                << '\n';
    }
    std::cout << json{{"output", a.output},
                      {"epochs", a.epochs},
                      {"final_loglik", result.log.back().loglik},
                      {"method", "explore"}}
                     .dump()
              << '\n';
}

// ---------------------------------------------------------------------------

struct VimlArgs {
    std::string embeddings, triplets, output, diagnostics;
    std::string link = "scaled:0.01", method = "seg", averaging = "uniform", schedule = "constant";
    double step = 0.1, radius = 1.0;
    long iterations = 2000;
    int batch = 64;
    std::uint64_t seed = 0;
};

void run_viml(const VimlArgs& a) {
    echo_config("viml", json{{"embeddings", a.embeddings},
                             {"triplets", a.triplets},
                             {"link", a.link},
                             {"method", a.method},
                             {"averaging", a.averaging},
                             {"schedule", a.schedule},
                             {"step", a.step},
                             {"iterations", a.iterations},
                             {"batch", a.batch},
                             {"radius", a.radius},
                             {"seed", a.seed},
                             {"output", a.output}});
    const auto table = fairdist::load_embeddings(a.embeddings);
    const auto data = fairdist::load_triplets_csv(table, a.triplets);
    const auto link = fairdist::LinkFunction::parse(a.link);

    fairdist::VISolverConfig config;
    if (a.method == "sg")
        config.method = fairdist::ViMethod::sg;
    else if (a.method == "seg")
        config.method = fairdist::ViMethod::seg;
    else
        throw fairdist::validation_error("--method must be sg or seg");
    if (a.averaging == "none")
        config.averaging = fairdist::ViAveraging::none;
    else if (a.averaging == "uniform")
        config.averaging = fairdist::ViAveraging::uniform;
    else if (a.averaging.rfind("geometric:", 0) == 0) {
        config.averaging = fairdist::ViAveraging::geometric;
        try {
            config.beta = std::stod(a.averaging.substr(10));
        } catch (const std::exception&) {
            throw fairdist::validation_error("--averaging geometric:<beta> needs a number");
        }
    } else {
        throw fairdist::validation_error("--averaging must be none|uniform|geometric:<beta>");
    }
    if (a.schedule == "constant")
        config.schedule = fairdist::ViStepSchedule::constant;
    else if (a.schedule == "inv_sqrt")
        config.schedule = fairdist::ViStepSchedule::inv_sqrt;
    else
        throw fairdist::validation_error("--schedule must be constant or inv_sqrt");
    config.step = a.step;
    config.iterations = a.iterations;
    config.batch_size = a.batch;
    config.seed = a.seed;
    config.radius = a.radius;

    const auto result = fairdist::viml_fit(table, data, link, config);
    fairdist::save_metric(result.metric, a.output);
    if (!a.diagnostics.empty()) {
        auto out = open_output(a.diagnostics);
        for (const auto& rec : result.log)
            out << json{{"iter", rec.iter},
                        {"residual", rec.residual},
                        {"merit_mc", rec.merit_mc},
                        {"min_eig", rec.min_eig}}
                       .dump()
                << '\n';
    }
    std::cout << json{{"output", a.output},
                      {"iterations", a.iterations},
                      {"final_residual", result.log.back().residual},
                      {"method", "viml"}}
                     .dump()
              << '\n';
}

// ---------------------------------------------------------------------------

struct WeatArgs {
    std::string embeddings, x, y, a, b, metric, format = "json", name = "weat";
    long long max_partitions = 50000;
    std::uint64_t seed = 0;
    bool midp = false;
    int chunks = 1;
};

void run_weat(const WeatArgs& a) {
    echo_config("weat", json{{"embeddings", a.embeddings},
                             {"x", a.x},
                             {"y", a.y},
                             {"a", a.a},
                             {"b", a.b},
                             {"metric", a.metric},
                             {"max_partitions", a.max_partitions},
                             {"seed", a.seed},
                             {"midp", a.midp},
                             {"format", a.format}});
    const auto table = fairdist::load_embeddings(a.embeddings);
    fairdist::FairMetric metric = a.metric.empty() ? fairdist::FairMetric::identity(table.dim())
                                                   : fairdist::load_metric(a.metric);
    const auto spec = fairdist::make_weat_spec(
        a.name, table, fairdist::load_word_list(a.x), fairdist::load_word_list(a.y),
        fairdist::load_word_list(a.a), fairdist::load_word_list(a.b), std::move(metric));
    fairdist::WeatOptions options;
    options.max_partitions = a.max_partitions;
    options.seed = a.seed;
    options.midp = a.midp;
    options.chunks = a.chunks;
    const auto report = fairdist::run_weat(spec, options);
    if (a.format == "json")
        std::cout << fairdist::weat_report_json(report) << '\n';
    else if (a.format == "table")
        std::cout << fairdist::weat_report_table({&report, 1});
    else
        throw fairdist::validation_error("--format must be json or table");
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string mode = "triplets", output, truth = "identity";
    int d = 2, k = 0, l = 0, n = 1000;
    double lambda_a = 0.0, lambda_b = 0.0, sigma = 1.0, epsilon = 0.01, mean_scale = 0.0;
    std::uint64_t seed = 0;
};

void run_simulate(const SimulateArgs& a) {
    echo_config("simulate", json{{"mode", a.mode},
                                 {"d", a.d},
                                 {"k", a.k},
                                 {"l", a.l},
                                 {"n", a.n},
                                 {"lambda_a", a.lambda_a},
                                 {"lambda_b", a.lambda_b},
                                 {"sigma", a.sigma},
                                 {"epsilon", a.epsilon},
                                 {"truth", a.truth},
                                 {"seed", a.seed},
                                 {"output", a.output}});
    const auto spec =
        fairdist::make_planted_spec(a.d, a.k, a.l, a.lambda_a, a.lambda_b, a.sigma, a.seed);

    json manifest{{"mode", a.mode}, {"n", a.n}, {"d", a.d}};
    if (a.mode == "group") {
        fairdist::FactorModelSpec with_mean = spec;
        if (a.mean_scale != 0.0)
            with_mean.mean = Eigen::VectorXd::Constant(a.d, a.mean_scale);
        const auto table = fairdist::gen_group(with_mean, a.n, a.seed);
        fairdist::save_embeddings(table, a.output + ".emb");
        manifest["embeddings"] = a.output + ".emb";
    } else if (a.mode == "pairs" || a.mode == "triplets") {
        const auto diffs = fairdist::gen_pair_differences(spec, a.n, a.seed);
        const auto pair_table = fairdist::pair_table_from_differences(diffs);
        fairdist::save_embeddings(pair_table, a.output + ".emb");
        manifest["embeddings"] = a.output + ".emb";
        std::vector<std::pair<int, int>> pairs;
        pairs.reserve(static_cast<std::size_t>(a.n));
        for (int i = 0; i < a.n; ++i) pairs.emplace_back(2 * i, 2 * i + 1);
        fairdist::save_pairs_csv(pair_table, pairs, a.output + ".pairs.csv");
        manifest["pairs"] = a.output + ".pairs.csv";
        if (a.mode == "triplets") {
            fairdist::FairMetric truth = [&] {
                if (a.truth == "identity") return fairdist::FairMetric::identity(a.d);
                if (a.truth == "projector") {
                    const auto sub = fairdist::planted_subspace(spec);
                    return fairdist::FairMetric(
                        Eigen::MatrixXd::Identity(a.d, a.d) -
                            sub.basis * sub.basis.transpose(),
                        fairdist::MetricMethod::face, spec.k);
                }
                throw fairdist::validation_error("--truth must be identity or projector");
            }();
            const auto triplets =
                fairdist::gen_binary_response(pair_table, truth, a.epsilon, a.seed);
            fairdist::save_triplets_csv(pair_table, triplets, a.output + ".triplets.csv");
            fairdist::save_metric(truth, a.output + ".truth.metric");
            manifest["triplets"] = a.output + ".triplets.csv";
            manifest["truth_metric"] = a.output + ".truth.metric";
        }
    } else {
        throw fairdist::validation_error("--mode must be pairs, group, or triplets");
    }
    if (a.mode != "triplets" && a.k > 0) {
        const auto sub = fairdist::planted_subspace(spec);
        const fairdist::FairMetric truth(
            Eigen::MatrixXd::Identity(a.d, a.d) - sub.basis * sub.basis.transpose(),
            fairdist::MetricMethod::face, spec.k);
        fairdist::save_metric(truth, a.output + ".truth.metric");
        manifest["truth_metric"] = a.output + ".truth.metric";
    }
    std::cout << manifest.dump() << '\n';
}

// ---------------------------------------------------------------------------

struct DistanceArgs {
    std::string embeddings, metric, a, b;
};

void run_distance(const DistanceArgs& a) {
    echo_config("distance",
                json{{"embeddings", a.embeddings}, {"metric", a.metric}, {"a", a.a}, {"b", a.b}});
    const auto table = fairdist::load_embeddings(a.embeddings);
    const fairdist::FairMetric metric = a.metric.empty()
                                            ? fairdist::FairMetric::identity(table.dim())
                                            : fairdist::load_metric(a.metric);
    const auto resolved = fairdist::resolve_tokens(table, {a.a, a.b});
    if (!resolved.missing.empty())
        throw fairdist::validation_error("token '" + resolved.missing.front() +
                                         "' is not in the embedding vocabulary");
    const double value =
        metric.distance(table.row(resolved.indices[0]), table.row(resolved.indices[1]));
    std::cout << json{{"a", a.a}, {"b", a.b}, {"distance", value}}.dump() << '\n';
}

// ---------------------------------------------------------------------------

struct BoundsArgs {
    int d = 20, k = 3, l = 5;
    double lambda_a = 25.0, lambda_b = 0.5, sigma = std::sqrt(0.5), t = 3.0, C = 1.0;
    long n = 5000;
    std::uint64_t seed = 0;
};

void run_bounds(const BoundsArgs& a) {
    echo_config("bounds", json{{"d", a.d},
                               {"k", a.k},
                               {"l", a.l},
                               {"lambda_a", a.lambda_a},
                               {"lambda_b", a.lambda_b},
                               {"sigma", a.sigma},
                               {"n", a.n},
                               {"t", a.t},
                               {"C", a.C}});
    const auto spec =
        fairdist::make_planted_spec(a.d, a.k, a.l, a.lambda_a, a.lambda_b, a.sigma, a.seed);
    const auto bound = fairdist::theoretical_bound(spec, a.n, a.t, a.C);
    std::cout << json{{"b", bound.b},
                      {"gamma_tilde", bound.gamma_tilde},
                      {"delta", bound.delta},
                      {"total", bound.total}}
                     .dump()
              << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairdist: learn and audit individual-fairness metrics for embeddings"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string log_level = "info";
    app.add_option("--log-level", log_level, "debug|info|warn|error|off")
        ->capture_default_str();
    int threads = 1;
    app.add_option("--threads", threads, "evaluation chunks where contracts allow parallelism")
        ->check(CLI::Range(1, 256))
        ->capture_default_str();

    FaceArgs face;
    auto* cmd_face = app.add_subcommand("face", "fit a projector metric from comparable data");
    cmd_face->add_option("--embeddings", face.embeddings)->required();
    auto* opt_groups = cmd_face->add_option("--groups", face.groups, "groups file");
    auto* opt_pairs = cmd_face->add_option("--pairs", face.pairs, "pairs CSV");
    opt_groups->excludes(opt_pairs);
    cmd_face->add_option("--k", face.k, "sensitive-subspace dimension (no default)")->required();
    cmd_face->add_option("--partitions", face.partitions)->check(CLI::Range(1, 4096));
    cmd_face->add_option("--output", face.output)->required();

    ExploreArgs expl;
    auto* cmd_explore = app.add_subcommand("explore", "fit a metric by scaled-logistic MLE");
    cmd_explore->add_option("--embeddings", expl.embeddings)->required();
    cmd_explore->add_option("--triplets", expl.triplets)->required();
    cmd_explore->add_option("--epsilon", expl.epsilon)->check(CLI::Range(0.0, 0.999999))
        ->capture_default_str();
    cmd_explore->add_option("--step0", expl.step0)->capture_default_str();
    cmd_explore->add_option("--batch", expl.batch)->capture_default_str();
    cmd_explore->add_option("--epochs", expl.epochs)->capture_default_str();
    cmd_explore->add_option("--seed", expl.seed)->capture_default_str();
    cmd_explore->add_option("--init", expl.init, "identity_scaled|zero")->capture_default_str();
    double lambda_max_val = 0.0;
    auto* opt_lmax = cmd_explore->add_option("--lambda-max", lambda_max_val, "op-norm cap");
    cmd_explore->add_option("--log", expl.log_path, "JSONL per-epoch training log");
    cmd_explore->add_option("--output", expl.output)->required();

    VimlArgs viml;
    auto* cmd_viml = app.add_subcommand("viml", "fit a metric by variational-inequality solving");
    cmd_viml->add_option("--embeddings", viml.embeddings)->required();
    cmd_viml->add_option("--triplets", viml.triplets)->required();
    cmd_viml->add_option("--link", viml.link, "logistic|scaled:<eps>|probit|table:<path>")
        ->capture_default_str();
    cmd_viml->add_option("--method", viml.method, "sg|seg")->capture_default_str();
    cmd_viml->add_option("--averaging", viml.averaging, "none|uniform|geometric:<beta>")
        ->capture_default_str();
    cmd_viml->add_option("--schedule", viml.schedule, "constant|inv_sqrt")->capture_default_str();
    cmd_viml->add_option("--step", viml.step)->capture_default_str();
    cmd_viml->add_option("--iters", viml.iterations)->capture_default_str();
    cmd_viml->add_option("--batch", viml.batch)->capture_default_str();
    cmd_viml->add_option("--radius", viml.radius)->capture_default_str();
    cmd_viml->add_option("--seed", viml.seed)->capture_default_str();
    cmd_viml->add_option("--diagnostics", viml.diagnostics, "JSONL checkpoint log");
    cmd_viml->add_option("--output", viml.output)->required();

    WeatArgs weat;
    auto* cmd_weat = app.add_subcommand("weat", "run a word-embedding association test");
    cmd_weat->add_option("--embeddings", weat.embeddings)->required();
    cmd_weat->add_option("--x", weat.x, "target word list X")->required();
    cmd_weat->add_option("--y", weat.y, "target word list Y")->required();
    cmd_weat->add_option("--a", weat.a, "attribute word list A")->required();
    cmd_weat->add_option("--b", weat.b, "attribute word list B")->required();
    cmd_weat->add_option("--metric", weat.metric, "metric file (default: identity)");
    cmd_weat->add_option("--max-partitions", weat.max_partitions)->capture_default_str();
    cmd_weat->add_option("--seed", weat.seed)->capture_default_str();
    cmd_weat->add_flag("--midp", weat.midp, "count ties at half weight");
    cmd_weat->add_option("--name", weat.name)->capture_default_str();
    cmd_weat->add_option("--format", weat.format, "json|table")->capture_default_str();

    SimulateArgs sim;
    auto* cmd_sim = app.add_subcommand("simulate", "generate planted-model data");
    cmd_sim->add_option("--mode", sim.mode, "pairs|group|triplets")->capture_default_str();
    cmd_sim->add_option("--d", sim.d)->capture_default_str();
    cmd_sim->add_option("--k", sim.k)->capture_default_str();
    cmd_sim->add_option("--l", sim.l)->capture_default_str();
    cmd_sim->add_option("--n", sim.n)->capture_default_str();
    cmd_sim->add_option("--lambda-a", sim.lambda_a, "lambda_min(A*'A*)")->capture_default_str();
    cmd_sim->add_option("--lambda-b", sim.lambda_b, "||B*B*'||_op")->capture_default_str();
    cmd_sim->add_option("--sigma", sim.sigma)->capture_default_str();
    cmd_sim->add_option("--epsilon", sim.epsilon)->capture_default_str();
    cmd_sim->add_option("--mean-scale", sim.mean_scale, "constant group mean (group mode)")
        ->capture_default_str();
    cmd_sim->add_option("--truth", sim.truth, "identity|projector")->capture_default_str();
    cmd_sim->add_option("--seed", sim.seed)->capture_default_str();
    cmd_sim->add_option("--output", sim.output, "output path prefix")->required();

    DistanceArgs dist;
    auto* cmd_dist = app.add_subcommand("distance", "distance between two tokens");
    cmd_dist->add_option("--embeddings", dist.embeddings)->required();
    cmd_dist->add_option("--metric", dist.metric, "metric file (default: identity)");
    cmd_dist->add_option("--a", dist.a)->required();
    cmd_dist->add_option("--b", dist.b)->required();

    BoundsArgs bounds;
    auto* cmd_bounds = app.add_subcommand("bounds", "subspace-error bound quantities");
    cmd_bounds->add_option("--d", bounds.d)->capture_default_str();
    cmd_bounds->add_option("--k", bounds.k)->capture_default_str();
    cmd_bounds->add_option("--l", bounds.l)->capture_default_str();
    cmd_bounds->add_option("--lambda-a", bounds.lambda_a)->capture_default_str();
    cmd_bounds->add_option("--lambda-b", bounds.lambda_b)->capture_default_str();
    cmd_bounds->add_option("--sigma", bounds.sigma)->capture_default_str();
    cmd_bounds->add_option("--n", bounds.n)->capture_default_str();
    cmd_bounds->add_option("--t", bounds.t)->capture_default_str();
    cmd_bounds->add_option("--const-c", bounds.C)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        fairdist::log::set_threshold(fairdist::log::level_from_string(log_level));
        if (cmd_face->parsed()) {
            if (face.groups.empty() == face.pairs.empty())
                throw fairdist::validation_error("face: exactly one of --groups/--pairs required");
            run_face(face);
        } else if (cmd_explore->parsed()) {
            if (opt_lmax->count() > 0) expl.lambda_max = lambda_max_val;
            run_explore(expl);
        } else if (cmd_viml->parsed()) {
            run_viml(viml);
        } else if (cmd_weat->parsed()) {
            weat.chunks = threads;
            run_weat(weat);
        } else if (cmd_sim->parsed()) {
            run_simulate(sim);
        } else if (cmd_dist->parsed()) {
            run_distance(dist);
        } else if (cmd_bounds->parsed()) {
            run_bounds(bounds);
        }
    } catch (const fairdist::validation_error& e) {
        fairdist::log::error(e.what());
        return 2;
    } catch (const fairdist::numeric_error& e) {
        fairdist::log::error(e.what());
        return 3;
    } catch (const std::exception& e) {
        fairdist::log::error(e.what());
        return 2;
    }
    return 0;
}
