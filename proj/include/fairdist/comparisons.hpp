#ifndef FAIRDIST_COMPARISONS_HPP
#define FAIRDIST_COMPARISONS_HPP

#include <string>
#include <utility>
#include <vector>

#include "fairdist/embeddings.hpp"

namespace fairdist {

// Comparable groups: index sets into an embedding table. Indices must be in
// range and unique within a group.
struct ComparableGroups {
    std::vector<std::vector<int>> groups;
};

ComparableGroups make_groups(const EmbeddingTable& table,
                             std::vector<std::vector<int>> groups);

// Labeled comparison triplets (a, b, y); y = 1 means comparable. a != b.
struct ComparisonTriplets {
    struct Triplet {
        int a;
        int b;
        int label;
    };
    std::vector<Triplet> items;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
};

ComparisonTriplets make_triplets(const EmbeddingTable& table,
                                 std::vector<ComparisonTriplets::Triplet> items);

// Groups file: one group per line, whitespace-separated tokens resolved
// against the vocabulary; unresolvable tokens warn and are dropped.
ComparableGroups load_groups_file(const EmbeddingTable& table, const std::string& path);

// Pairs file: CSV `token1,token2` (no header).
std::vector<std::pair<int, int>> load_pairs_csv(const EmbeddingTable& table,
                                                const std::string& path);

// Triplets file: CSV with header `a,b,y`.
ComparisonTriplets load_triplets_csv(const EmbeddingTable& table, const std::string& path);

void save_pairs_csv(const EmbeddingTable& table,
                    const std::vector<std::pair<int, int>>& pairs, const std::string& path);
void save_triplets_csv(const EmbeddingTable& table, const ComparisonTriplets& triplets,
                       const std::string& path);

} // namespace fairdist

#endif
