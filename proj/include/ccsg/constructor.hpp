// Counterfactual sample constructor: keyword-substitution negatives and
// dropout positives, with the first-epoch rule (no substitutions until
// contributions from a previous epoch exist).
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "ccsg/attribution.hpp"
#include "ccsg/embedding_store.hpp"
#include "ccsg/text.hpp"

namespace ccsg {

struct ConstructorConfig {
    std::size_t initial_set_size = 5;      // |I|
    std::size_t top_k = 2;                 // K
    std::size_t neighbors_per_keyword = 1;
    double dropout_rate = 0.05;            // R_p_drop for positives

    void validate() const;  // throws std::invalid_argument
};

struct SubstitutionRecord {
    std::size_t position = 0;
    std::string original;
    std::string replacement;
    double similarity = 0.0;
};

struct CounterfactualNegative {
    Statement statement;  // origin cf_neg, label flipped, one token replaced
    SubstitutionRecord provenance;
};

struct PositiveView {
    std::string anchor_id;
    std::uint64_t dropout_seed = 0;
    double dropout_rate = 0.0;
};

struct CounterfactualSet {
    std::string anchor_id;
    std::vector<PositiveView> positives;
    std::vector<CounterfactualNegative> negatives;
};

struct ConstructorCounters {
    std::size_t neighbor_shortfall = 0;    // keywords with fewer admissible neighbors than asked
    std::size_t anchors_without_nouns = 0;
    std::size_t substitutions = 0;
    std::size_t positives = 0;

    void add(const ConstructorCounters& other);
};

// Noun candidates ranked by cosine between the noun embedding and the
// statement centroid (mean of the other in-vocabulary token
// embeddings). Returns at most initial_set_size indices, best first.
std::vector<std::size_t> select_initial_entities(
    const Statement& statement, const EmbeddingStore& store, std::size_t initial_set_size,
    const std::set<std::string>& stoplist = default_stoplist());

// The top_k candidate indices with the largest contribution scores,
// descending; ties go to the smaller position. Throws when the entry is
// missing or misaligned (first-epoch misuse).
std::vector<std::size_t> rank_keywords(const std::vector<std::size_t>& candidates,
                                       const ContributionEntry* entry, std::size_t top_k);

// Nearest VKB neighbors of the keyword that survive the exclusion rules
// (the keyword itself, tokens sharing its first four characters,
// stoplist tokens), best first.
std::vector<EmbeddingStore::Neighbor> admissible_neighbors(
    const EmbeddingStore& store, const std::string& keyword, std::size_t n,
    const std::set<std::string>& stoplist);

// One cf_neg statement per admissible neighbor: the keyword position
// replaced, label flipped, fresh id, same group. An empty result is not
// an error; the shortfall is counted.
std::vector<CounterfactualNegative> substitute(const Statement& anchor, std::size_t keyword_idx,
                                               const EmbeddingStore& store, std::size_t n,
                                               const std::set<std::string>& stoplist,
                                               ConstructorCounters& counters);

PositiveView make_positive(const Statement& anchor, double dropout_rate, std::uint64_t seed);

struct Augmentation {
    std::vector<CounterfactualSet> per_anchor;  // aligned to the input batch
    ConstructorCounters counters;
};

// Full constructor pass over a batch of golden statements. With no
// previous-epoch contributions only dropout positives are attached;
// with them, each anchor runs entity selection -> keyword ranking ->
// substitution. Deterministic given (global_seed, epoch).
Augmentation construct(const std::vector<const Statement*>& anchors,
                       const ContributionMap* prev_epoch_contributions,
                       const ConstructorConfig& config, const EmbeddingStore& store,
                       std::uint64_t global_seed, int epoch,
                       const std::set<std::string>& stoplist = default_stoplist());

// Serializes an augmented batch (anchors plus generated members) in the
// statements record layout with origin/provenance fields added.
void write_augmented_corpus(const std::string& path,
                            const std::vector<const Statement*>& anchors,
                            const Augmentation& augmentation, const std::string& config_hash);

}  // namespace ccsg
