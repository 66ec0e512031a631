#include "fairdist/weat.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iomanip>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "fairdist/errors.hpp"
#include "fairdist/logging.hpp"
#include "fairdist/rng.hpp"

namespace fairdist {

namespace {

constexpr long long kBinomSaturated = -1;

// C(n, k) saturating to kBinomSaturated once it exceeds the cap.
long long binomial_capped(int n, int k, long long cap) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    unsigned long long result = 1;
    for (int i = 1; i <= k; ++i) {
        // result * (n - k + i) / i is always integral at this point
        unsigned long long next = result * static_cast<unsigned long long>(n - k + i);
        if (next / static_cast<unsigned long long>(n - k + i) != result) return kBinomSaturated;
        result = next / static_cast<unsigned long long>(i);
        if (result > static_cast<unsigned long long>(cap)) return kBinomSaturated;
    }
    return static_cast<long long>(result);
}

// Lexicographically rank-th k-subset of {0..n-1}, 0-based rank.
std::vector<int> unrank_combination(long long rank, int n, int k) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    int c = 0;
    while (k > 0) {
        const long long below = binomial_capped(n - 1 - c, k - 1, (1LL << 62));
        if (rank < below) {
            out.push_back(c);
            --k;
        } else {
            rank -= below;
        }
        ++c;
    }
    return out;
}

// Advance to the next k-subset in lexicographic order; false when exhausted.
bool next_combination(std::vector<int>& comb, int n) {
    const int k = static_cast<int>(comb.size());
    int i = k - 1;
    while (i >= 0 && comb[static_cast<std::size_t>(i)] == n - k + i) --i;
    if (i < 0) return false;
    ++comb[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < k; ++j)
        comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
    return true;
}

struct PartitionCounts {
    long long greater = 0;
    long long ties = 0;
};

// Statistic of the partition whose X-side is the given subset, computed from
// precomputed per-word associations. Every partition (including the observed
// one) goes through this same arithmetic, and both halves are summed in index
// order, so a partition and its complement tie bit-for-bit.
double partition_statistic(const std::vector<double>& assoc, const std::vector<int>& subset) {
    std::vector<bool> in_x(assoc.size(), false);
    for (int i : subset) in_x[static_cast<std::size_t>(i)] = true;
    double sum_x = 0.0, sum_y = 0.0;
    for (std::size_t i = 0; i < assoc.size(); ++i) (in_x[i] ? sum_x : sum_y) += assoc[i];
    const double m = static_cast<double>(subset.size());
    return std::abs(sum_x / m - sum_y / m);
}

std::vector<double> word_associations(const WeatSpec& spec) {
    std::vector<double> assoc;
    assoc.reserve(spec.targets_x.size() + spec.targets_y.size());
    for (const auto& x : spec.targets_x)
        assoc.push_back(word_association(x, spec.attributes_a, spec.attributes_b, spec.metric));
    for (const auto& y : spec.targets_y)
        assoc.push_back(word_association(y, spec.attributes_a, spec.attributes_b, spec.metric));
    return assoc;
}

void validate_spec(const WeatSpec& spec) {
    if (spec.targets_x.empty() || spec.targets_y.empty())
        throw validation_error("weat: target sets must be nonempty");
    if (spec.targets_x.size() != spec.targets_y.size())
        throw validation_error("weat: target sets have sizes " +
                               std::to_string(spec.targets_x.size()) + " and " +
                               std::to_string(spec.targets_y.size()) + "; they must match");
    if (spec.attributes_a.empty() || spec.attributes_b.empty())
        throw validation_error("weat: attribute sets must be nonempty");
}

} // namespace

double metric_cosine(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                     const FairMetric& metric) {
    if (x.size() != metric.dim() || y.size() != metric.dim())
        throw validation_error("metric_cosine: vector dims do not match metric dim " +
                               std::to_string(metric.dim()));
    const Eigen::VectorXd sy = metric.matrix() * y;
    const double nx2 = x.dot(metric.matrix() * x);
    const double ny2 = y.dot(sy);
    if (nx2 <= 1e-12 || ny2 <= 1e-12)
        throw numeric_error("metric_cosine: vector annihilated by metric (norm^2 = " +
                            std::to_string(std::min(nx2, ny2)) + ")");
    const double value = x.dot(sy) / (std::sqrt(nx2) * std::sqrt(ny2));
    return std::clamp(value, -1.0, 1.0);
}

double word_association(const Eigen::VectorXd& x, std::span<const Eigen::VectorXd> a,
                        std::span<const Eigen::VectorXd> b, const FairMetric& metric) {
    if (a.empty() || b.empty())
        throw validation_error("word_association: attribute sets must be nonempty");
    double sum_a = 0.0;
    for (const auto& v : a) sum_a += metric_cosine(x, v, metric);
    double sum_b = 0.0;
    for (const auto& v : b) sum_b += metric_cosine(x, v, metric);
    return sum_a / static_cast<double>(a.size()) - sum_b / static_cast<double>(b.size());
}

double set_association(std::span<const Eigen::VectorXd> x, std::span<const Eigen::VectorXd> a,
                       std::span<const Eigen::VectorXd> b, const FairMetric& metric) {
    if (x.empty()) throw validation_error("set_association: empty target set");
    double sum = 0.0;
    for (const auto& v : x) sum += word_association(v, a, b, metric);
    return sum / static_cast<double>(x.size());
}

double test_statistic(std::span<const Eigen::VectorXd> x, std::span<const Eigen::VectorXd> y,
                      std::span<const Eigen::VectorXd> a, std::span<const Eigen::VectorXd> b,
                      const FairMetric& metric) {
    return std::abs(set_association(x, a, b, metric) - set_association(y, a, b, metric));
}

WeatSpec make_weat_spec(std::string name, const EmbeddingTable& table,
                        const std::vector<std::string>& x_tokens,
                        const std::vector<std::string>& y_tokens,
                        const std::vector<std::string>& a_tokens,
                        const std::vector<std::string>& b_tokens, FairMetric metric) {
    if (x_tokens.size() != y_tokens.size())
        throw validation_error("weat: target lists have sizes " + std::to_string(x_tokens.size()) +
                               " and " + std::to_string(y_tokens.size()) + "; they must match");
    if (metric.dim() != table.dim())
        throw validation_error("weat: metric dim " + std::to_string(metric.dim()) +
                               " does not match embedding dim " + std::to_string(table.dim()));

    std::unordered_set<std::string> x_set, y_set;
    for (const auto& t : x_tokens) {
        if (!x_set.insert(normalize_token(t)).second)
            throw validation_error("weat: token '" + t + "' repeated within X");
    }
    for (const auto& t : y_tokens) {
        const std::string norm = normalize_token(t);
        if (!y_set.insert(norm).second)
            throw validation_error("weat: token '" + t + "' repeated within Y");
        if (x_set.count(norm))
            throw validation_error("weat: token '" + norm + "' appears in both X and Y");
    }

    WeatSpec spec{std::move(name), {}, {}, {}, {}, std::move(metric)};
    for (std::size_t i = 0; i < x_tokens.size(); ++i) {
        const auto xi = table.find(normalize_token(x_tokens[i]));
        const auto yi = table.find(normalize_token(y_tokens[i]));
        if (!xi || !yi) {
            log::warn("weat: dropping target pair ('" + x_tokens[i] + "', '" + y_tokens[i] +
                      "'): token missing from the vocabulary");
            continue;
        }
        spec.targets_x.push_back(table.row(*xi));
        spec.targets_y.push_back(table.row(*yi));
    }
    for (const auto& t : a_tokens) {
        if (auto idx = table.find(normalize_token(t)))
            spec.attributes_a.push_back(table.row(*idx));
        else
            log::warn("weat: dropping attribute token '" + t + "' (not in vocabulary)");
    }
    for (const auto& t : b_tokens) {
        if (auto idx = table.find(normalize_token(t)))
            spec.attributes_b.push_back(table.row(*idx));
        else
            log::warn("weat: dropping attribute token '" + t + "' (not in vocabulary)");
    }
    validate_spec(spec);
    return spec;
}

PermutationResult permutation_p_value(const WeatSpec& spec, const WeatOptions& options) {
    validate_spec(spec);
    if (options.max_partitions < 1)
        throw validation_error("permutation_p_value: max_partitions must be positive");
    if (options.max_partitions > 1'000'000'000LL)
        throw validation_error("permutation_p_value: max_partitions capped at 1e9");
    if (options.chunks < 1) throw validation_error("permutation_p_value: chunks must be positive");

    const int m = static_cast<int>(spec.targets_x.size());
    const int total_words = 2 * m;
    const std::vector<double> assoc = word_associations(spec);

    std::vector<int> identity(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) identity[static_cast<std::size_t>(i)] = i;
    const double observed = partition_statistic(assoc, identity);

    const long long total = binomial_capped(total_words, m, options.max_partitions);
    const bool exact = total != kBinomSaturated && total <= options.max_partitions;
    const long long evaluated = exact ? total : options.max_partitions;
    const int chunks = static_cast<int>(std::min<long long>(options.chunks, evaluated));

    auto run_exact_chunk = [&](long long lo, long long hi) {
        PartitionCounts counts;
        std::vector<int> comb = unrank_combination(lo, total_words, m);
        for (long long r = lo; r < hi; ++r) {
            const double s = partition_statistic(assoc, comb);
            if (s > observed) ++counts.greater;
            else if (s == observed) ++counts.ties;
            if (r + 1 < hi) next_combination(comb, total_words);
        }
        return counts;
    };

    auto run_sampled_chunk = [&](int chunk, long long draws) {
        PartitionCounts counts;
        Rng rng(split_seed(options.seed, 0x37 + static_cast<std::uint64_t>(chunk)));
        std::vector<int> pool(static_cast<std::size_t>(total_words));
        std::vector<int> subset(static_cast<std::size_t>(m));
        for (long long r = 0; r < draws; ++r) {
            for (int i = 0; i < total_words; ++i) pool[static_cast<std::size_t>(i)] = i;
            for (int i = 0; i < m; ++i) {
                const std::size_t j =
                    static_cast<std::size_t>(i) +
                    uniform_index(rng, static_cast<std::size_t>(total_words - i));
                std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
                subset[static_cast<std::size_t>(i)] = pool[static_cast<std::size_t>(i)];
            }
            const double s = partition_statistic(assoc, subset);
            if (s > observed) ++counts.greater;
            else if (s == observed) ++counts.ties;
        }
        return counts;
    };

    std::vector<std::future<PartitionCounts>> futures;
    futures.reserve(static_cast<std::size_t>(chunks));
    for (int c = 0; c < chunks; ++c) {
        const long long lo = evaluated * c / chunks;
        const long long hi = evaluated * (c + 1) / chunks;
        if (exact)
            futures.push_back(std::async(chunks > 1 ? std::launch::async : std::launch::deferred,
                                         run_exact_chunk, lo, hi));
        else
            futures.push_back(std::async(chunks > 1 ? std::launch::async : std::launch::deferred,
                                         run_sampled_chunk, c, hi - lo));
    }
    PartitionCounts counts;
    for (auto& f : futures) {
        const PartitionCounts c = f.get();
        counts.greater += c.greater;
        counts.ties += c.ties;
    }

    const double numerator = options.midp
                                 ? static_cast<double>(counts.greater) + 0.5 * static_cast<double>(counts.ties)
                                 : static_cast<double>(counts.greater);
    return PermutationResult{numerator / static_cast<double>(evaluated), evaluated, exact};
}

PermutationResult permutation_p_value(const WeatSpec& spec, long long max_partitions,
                                      std::uint64_t seed) {
    WeatOptions options;
    options.max_partitions = max_partitions;
    options.seed = seed;
    return permutation_p_value(spec, options);
}

double effect_size(const WeatSpec& spec) {
    validate_spec(spec);
    const std::vector<double> assoc = word_associations(spec);
    if (assoc.size() < 2) throw validation_error("effect_size: need at least two target words");
    double mean = 0.0;
    for (double a : assoc) mean += a;
    mean /= static_cast<double>(assoc.size());
    double var = 0.0;
    for (double a : assoc) var += (a - mean) * (a - mean);
    var /= static_cast<double>(assoc.size());  // population SD
    const double sd = std::sqrt(var);
    if (sd <= 0.0) throw numeric_error("effect_size: degenerate association spread (SD = 0)");
    const double stat = test_statistic(spec.targets_x, spec.targets_y, spec.attributes_a,
                                       spec.attributes_b, spec.metric);
    return stat / sd;
}

WeatReport run_weat(const WeatSpec& spec, const WeatOptions& options) {
    WeatReport report;
    report.test_name = spec.name;
    report.statistic = test_statistic(spec.targets_x, spec.targets_y, spec.attributes_a,
                                      spec.attributes_b, spec.metric);
    const PermutationResult perm = permutation_p_value(spec, options);
    report.p_value = perm.p_value;
    report.partitions_evaluated = perm.evaluated;
    report.exact = perm.exact;
    report.effect_size = effect_size(spec);
    return report;
}

std::string weat_report_json(const WeatReport& report) {
    nlohmann::json j;
    j["test_name"] = report.test_name;
    j["statistic"] = report.statistic;
    j["p_value"] = report.p_value;
    j["effect_size"] = report.effect_size;
    j["exact"] = report.exact;
    j["partitions"] = report.partitions_evaluated;
    return j.dump();
}

namespace {

std::string format_p(double p) {
    if (p == 0.0) return "0.00";
    if (p < 0.0095) {
        std::ostringstream ss;
        ss << std::scientific << std::setprecision(0) << p;
        std::string s = ss.str();  // like "4e-05"
        const auto epos = s.find('e');
        std::string mant = s.substr(0, epos);
        int exp = std::stoi(s.substr(epos + 1));
        return mant + "e" + std::to_string(exp);
    }
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << p;
    return ss.str();
}

std::string format_d(double d) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << d;
    return ss.str();
}

} // namespace

std::string weat_report_table(std::span<const WeatReport> reports) {
    std::size_t name_w = 4;
    for (const auto& r : reports) name_w = std::max(name_w, r.test_name.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(name_w) + 2) << "Test" << std::right
        << std::setw(8) << "P" << std::setw(8) << "d" << '\n';
    for (const auto& r : reports) {
        out << std::left << std::setw(static_cast<int>(name_w) + 2) << r.test_name << std::right
            << std::setw(8) << format_p(r.p_value) << std::setw(8) << format_d(r.effect_size)
            << '\n';
    }
    return out.str();
}

} // namespace fairdist
