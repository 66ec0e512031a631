#ifndef FAIRDIST_EMBEDDINGS_HPP
#define FAIRDIST_EMBEDDINGS_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fairdist {

// Vocabulary-labeled n x d matrix of feature embeddings. Immutable once
// built; safe to share across threads.
class EmbeddingTable {
public:
    EmbeddingTable(std::vector<std::string> vocab, Eigen::MatrixXd matrix);

    int size() const { return static_cast<int>(matrix_.rows()); }
    int dim() const { return static_cast<int>(matrix_.cols()); }
    const std::vector<std::string>& vocab() const { return vocab_; }
    const Eigen::MatrixXd& matrix() const { return matrix_; }
    const std::string& token(int row) const { return vocab_.at(static_cast<std::size_t>(row)); }
    Eigen::VectorXd row(int i) const { return matrix_.row(i).transpose(); }
    std::optional<int> find(const std::string& token) const;

private:
    std::vector<std::string> vocab_;
    Eigen::MatrixXd matrix_;
    std::unordered_map<std::string, int> index_;
};

// word2vec text format: optional "n d" header, then one `token v1 .. vd`
// line per word. Tokens are NFC-normalized; on duplicates the first
// occurrence wins with a warning.
EmbeddingTable load_embeddings(const std::string& path);
void save_embeddings(const EmbeddingTable& table, const std::string& path);

struct ResolveResult {
    std::vector<int> indices;            // rows of the tokens that resolved, input order
    std::vector<std::string> missing;    // tokens that did not resolve, input order
};

// Pure lookup; policy about missing tokens is the caller's business.
ResolveResult resolve_tokens(const EmbeddingTable& table, const std::vector<std::string>& tokens);

// One token per line; '#' starts a comment; blank lines ignored.
std::vector<std::string> load_word_list(const std::string& path);

// Unicode NFC, applied to every token at load time. Case is preserved.
std::string normalize_token(const std::string& token);

} // namespace fairdist

#endif
