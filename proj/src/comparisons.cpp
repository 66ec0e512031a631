#include "fairdist/comparisons.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "fairdist/errors.hpp"
#include "fairdist/logging.hpp"

namespace fairdist {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        // trim surrounding blanks
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
    }
    return out;
}

int resolve_or_throw(const EmbeddingTable& table, const std::string& token,
                     const std::string& path, long lineno) {
    const std::string norm = normalize_token(token);
    if (auto idx = table.find(norm)) return *idx;
    throw validation_error("token '" + norm + "' on line " + std::to_string(lineno) + " of " +
                           path + " is not in the embedding vocabulary");
}

} // namespace

ComparableGroups make_groups(const EmbeddingTable& table,
                             std::vector<std::vector<int>> groups) {
    for (std::size_t g = 0; g < groups.size(); ++g) {
        std::unordered_set<int> seen;
        for (int idx : groups[g]) {
            if (idx < 0 || idx >= table.size())
                throw validation_error("group " + std::to_string(g + 1) + ": index " +
                                       std::to_string(idx) + " is out of range");
            if (!seen.insert(idx).second)
                throw validation_error("group " + std::to_string(g + 1) + ": index " +
                                       std::to_string(idx) + " repeated within the group");
        }
    }
    return ComparableGroups{std::move(groups)};
}

ComparisonTriplets make_triplets(const EmbeddingTable& table,
                                 std::vector<ComparisonTriplets::Triplet> items) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& t = items[i];
        if (t.a < 0 || t.a >= table.size() || t.b < 0 || t.b >= table.size())
            throw validation_error("triplet " + std::to_string(i + 1) + ": index out of range");
        if (t.a == t.b)
            throw validation_error("triplet " + std::to_string(i + 1) +
                                   ": the two items must differ");
        if (t.label != 0 && t.label != 1)
            throw validation_error("triplet " + std::to_string(i + 1) + ": label must be 0 or 1, got " +
                                   std::to_string(t.label));
    }
    return ComparisonTriplets{std::move(items)};
}

ComparableGroups load_groups_file(const EmbeddingTable& table, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("load_groups_file: cannot open " + path);
    std::vector<std::vector<int>> groups;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ss(line);
        std::string token;
        std::vector<int> group;
        std::unordered_set<int> seen;
        while (ss >> token) {
            const std::string norm = normalize_token(token);
            auto idx = table.find(norm);
            if (!idx) {
                log::warn("load_groups_file: dropping unknown token '" + norm + "' on line " +
                          std::to_string(lineno));
                continue;
            }
            if (seen.insert(*idx).second) group.push_back(*idx);
        }
        if (!group.empty()) groups.push_back(std::move(group));
    }
    return make_groups(table, std::move(groups));
}

std::vector<std::pair<int, int>> load_pairs_csv(const EmbeddingTable& table,
                                                const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("load_pairs_csv: cannot open " + path);
    std::vector<std::pair<int, int>> pairs;
    std::string line;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_csv(line);
        if (fields.size() != 2)
            throw validation_error("load_pairs_csv: line " + std::to_string(lineno) + " of " +
                                   path + " must be `token1,token2`");
        pairs.emplace_back(resolve_or_throw(table, fields[0], path, lineno),
                           resolve_or_throw(table, fields[1], path, lineno));
    }
    return pairs;
}

ComparisonTriplets load_triplets_csv(const EmbeddingTable& table, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("load_triplets_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw validation_error("load_triplets_csv: " + path + " is empty");
    {
        auto header = split_csv(line);
        if (header.size() != 3 || header[0] != "a" || header[1] != "b" || header[2] != "y")
            throw validation_error("load_triplets_csv: " + path + " must start with header `a,b,y`");
    }
    std::vector<ComparisonTriplets::Triplet> items;
    long lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fields = split_csv(line);
        if (fields.size() != 3)
            throw validation_error("load_triplets_csv: line " + std::to_string(lineno) + " of " +
                                   path + " must be `a,b,y`");
        int label = 0;
        if (fields[2] == "0")
            label = 0;
        else if (fields[2] == "1")
            label = 1;
        else
            throw validation_error("load_triplets_csv: label '" + fields[2] + "' on line " +
                                   std::to_string(lineno) + " of " + path + " must be 0 or 1");
        items.push_back({resolve_or_throw(table, fields[0], path, lineno),
                         resolve_or_throw(table, fields[1], path, lineno), label});
    }
    return make_triplets(table, std::move(items));
}

void save_pairs_csv(const EmbeddingTable& table,
                    const std::vector<std::pair<int, int>>& pairs, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("save_pairs_csv: cannot open " + path);
    for (const auto& [a, b] : pairs) out << table.token(a) << ',' << table.token(b) << '\n';
    if (!out) throw numeric_error("save_pairs_csv: write failed for " + path);
}

void save_triplets_csv(const EmbeddingTable& table, const ComparisonTriplets& triplets,
                       const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("save_triplets_csv: cannot open " + path);
    out << "a,b,y\n";
    for (const auto& t : triplets.items)
        out << table.token(t.a) << ',' << table.token(t.b) << ',' << t.label << '\n';
    if (!out) throw numeric_error("save_triplets_csv: write failed for " + path);
}

} // namespace fairdist
