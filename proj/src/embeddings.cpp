#include "fairdist/embeddings.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "fairdist/errors.hpp"
#include "fairdist/logging.hpp"
#include "fairdist/metric.hpp"

namespace fairdist {

namespace {

constexpr int kMaxDim = 4096;
constexpr long kMaxRows = 10'000'000;

bool is_ascii(const std::string& s) {
    for (unsigned char c : s)
        if (c >= 0x80) return false;
    return true;
}

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

bool parse_nonneg_int(const std::string& s, long& out) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    try {
        out = std::stol(s);
    } catch (const std::exception&) {
        return false;
    }
    return true;
}

} // namespace

std::string normalize_token(const std::string& token) {
    if (is_ascii(token)) return token;  // ASCII is NFC already
    UErrorCode ec = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(ec);
    if (U_FAILURE(ec) || nfc == nullptr)
        throw numeric_error("normalize_token: ICU NFC instance unavailable");
    icu::UnicodeString u = icu::UnicodeString::fromUTF8(token);
    icu::UnicodeString normalized = nfc->normalize(u, ec);
    if (U_FAILURE(ec))
        throw validation_error("normalize_token: invalid UTF-8 token");
    std::string out;
    normalized.toUTF8String(out);
    return out;
}

EmbeddingTable::EmbeddingTable(std::vector<std::string> vocab, Eigen::MatrixXd matrix)
    : vocab_(std::move(vocab)), matrix_(std::move(matrix)) {
    if (matrix_.rows() < 1) throw validation_error("EmbeddingTable: need at least one row");
    if (matrix_.cols() < 1) throw validation_error("EmbeddingTable: need at least one dimension");
    if (matrix_.cols() > kMaxDim)
        throw validation_error("EmbeddingTable: dimension " + std::to_string(matrix_.cols()) +
                               " exceeds the cap of " + std::to_string(kMaxDim));
    if (matrix_.rows() > kMaxRows)
        throw validation_error("EmbeddingTable: row count exceeds the cap of " +
                               std::to_string(kMaxRows));
    if (static_cast<Eigen::Index>(vocab_.size()) != matrix_.rows())
        throw validation_error("EmbeddingTable: vocab size " + std::to_string(vocab_.size()) +
                               " does not match row count " + std::to_string(matrix_.rows()));
    if (!matrix_.allFinite())
        throw validation_error("EmbeddingTable: matrix has non-finite entries");
    index_.reserve(vocab_.size());
    for (std::size_t i = 0; i < vocab_.size(); ++i) {
        auto [it, inserted] = index_.emplace(vocab_[i], static_cast<int>(i));
        if (!inserted)
            throw validation_error("EmbeddingTable: duplicate token '" + vocab_[i] + "'");
    }
}

std::optional<int> EmbeddingTable::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

EmbeddingTable load_embeddings(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("load_embeddings: cannot open " + path);

    std::vector<std::string> vocab;
    std::unordered_set<std::string> seen;
    std::vector<std::vector<double>> rows;
    long declared_rows = -1;
    long declared_dim = -1;
    long dim = -1;
    long lineno = 0;
    std::string line;
    bool first_content_line = true;

    while (std::getline(in, line)) {
        ++lineno;
        auto fields = split_ws(line);
        if (fields.empty()) continue;

        if (first_content_line && fields.size() == 2) {
            long n = 0, d = 0;
            if (parse_nonneg_int(fields[0], n) && parse_nonneg_int(fields[1], d)) {
                declared_rows = n;
                declared_dim = d;
                first_content_line = false;
                continue;
            }
        }
        first_content_line = false;

        if (fields.size() < 2)
            throw validation_error("load_embeddings: line " + std::to_string(lineno) + " of " +
                                   path + " has no vector values");
        std::string token = normalize_token(fields[0]);
        const long row_dim = static_cast<long>(fields.size()) - 1;
        if (dim < 0) {
            dim = row_dim;
            if (declared_dim >= 0 && declared_dim != dim)
                throw validation_error("load_embeddings: header declares dim " +
                                       std::to_string(declared_dim) + " but line " +
                                       std::to_string(lineno) + " has " + std::to_string(dim));
        } else if (row_dim != dim) {
            throw validation_error("load_embeddings: line " + std::to_string(lineno) + " of " +
                                   path + " has " + std::to_string(row_dim) +
                                   " values, expected " + std::to_string(dim));
        }

        std::vector<double> values(static_cast<std::size_t>(dim));
        for (long j = 0; j < dim; ++j) {
            try {
                values[static_cast<std::size_t>(j)] = parse_double(fields[static_cast<std::size_t>(j + 1)]);
            } catch (const validation_error&) {
                throw validation_error("load_embeddings: non-numeric field '" +
                                       fields[static_cast<std::size_t>(j + 1)] + "' on line " +
                                       std::to_string(lineno) + " of " + path);
            }
        }

        if (!seen.insert(token).second) {
            log::warn("load_embeddings: duplicate token '" + token + "' on line " +
                      std::to_string(lineno) + ", keeping first occurrence");
            continue;
        }
        vocab.push_back(std::move(token));
        rows.push_back(std::move(values));
    }

    if (rows.empty()) throw validation_error("load_embeddings: " + path + " contains no embeddings");
    if (declared_rows >= 0 && declared_rows != static_cast<long>(rows.size()))
        log::warn("load_embeddings: header declares " + std::to_string(declared_rows) +
                  " rows but " + std::to_string(rows.size()) + " were loaded");

    Eigen::MatrixXd M(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (long j = 0; j < dim; ++j)
            M(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<std::size_t>(j)];
    return EmbeddingTable(std::move(vocab), std::move(M));
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw validation_error("save_embeddings: cannot open " + path);
    out << table.size() << ' ' << table.dim() << '\n';
    for (int i = 0; i < table.size(); ++i) {
        out << table.token(i);
        for (int j = 0; j < table.dim(); ++j) out << ' ' << format_double(table.matrix()(i, j));
        out << '\n';
    }
    if (!out) throw numeric_error("save_embeddings: write failed for " + path);
}

ResolveResult resolve_tokens(const EmbeddingTable& table, const std::vector<std::string>& tokens) {
    ResolveResult out;
    for (const auto& raw : tokens) {
        const std::string token = normalize_token(raw);
        if (auto idx = table.find(token))
            out.indices.push_back(*idx);
        else
            out.missing.push_back(token);
    }
    return out;
}

std::vector<std::string> load_word_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw validation_error("load_word_list: cannot open " + path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto fields = split_ws(line);
        if (fields.empty()) continue;
        if (fields.size() > 1)
            throw validation_error("load_word_list: multiple tokens on one line in " + path +
                                   ": '" + line + "'");
        tokens.push_back(normalize_token(fields[0]));
    }
    return tokens;
}

} // namespace fairdist
