// Vector knowledge base: token -> dense embedding, with exact cosine
// similarity search over the whole vocabulary.
#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ccsg {

// Cosine similarity. Throws std::invalid_argument on length mismatch.
// A zero-norm operand yields 0 rather than NaN.
double cosine(std::span<const double> u, std::span<const double> v);

class EmbeddingStore {
public:
    struct Neighbor {
        std::string token;
        double similarity;
    };

    // Loads the plain-text word-vector layout: one `token v1 ... vd` per
    // line, whitespace separated, UTF-8. Tokens are lowercased; a token
    // seen twice keeps its first vector and bumps duplicate_count().
    static EmbeddingStore load(const std::string& path,
                               std::optional<std::size_t> expected_dim = std::nullopt);

    // Builds a store directly from (token, vector) rows; same
    // lowercasing and duplicate rules as load().
    static EmbeddingStore from_rows(
        const std::vector<std::pair<std::string, std::vector<double>>>& rows);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return tokens_.size(); }
    std::size_t duplicate_count() const { return duplicates_; }

    // Insertion order; stable across runs.
    const std::vector<std::string>& tokens() const { return tokens_; }

    bool contains(std::string_view token) const;

    // Exact stored vector. Throws std::out_of_range for unknown tokens.
    std::span<const double> vector_of(std::string_view token) const;

    // Exact top-k by cosine, descending; ties broken by ascending token.
    // The query token itself (case-insensitively) and `exclude` never
    // appear. Returns fewer than k when candidates run out. Throws on
    // unknown token or k == 0.
    std::vector<Neighbor> nearest(std::string_view token, std::size_t k,
                                  const std::set<std::string>& exclude = {}) const;
    std::vector<Neighbor> nearest(std::span<const double> query, std::size_t k,
                                  const std::set<std::string>& exclude = {},
                                  std::string_view self_token = {}) const;

    // FNV-1a over dim and the ordered vocabulary; identifies the VKB a
    // model was initialized from.
    std::string vocab_hash() const;

private:
    std::size_t dim_ = 0;
    std::vector<std::string> tokens_;
    std::vector<double> data_;  // tokens_.size() x dim_, row-major
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t duplicates_ = 0;

    void insert(std::string token, const std::vector<double>& vec);
};

}  // namespace ccsg
