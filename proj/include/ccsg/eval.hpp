// Accuracy, paired consistency, plausibility filtering and the ACE
// intervention estimator.
#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ccsg/constructor.hpp"
#include "ccsg/embedding_store.hpp"
#include "ccsg/model.hpp"
#include "ccsg/text.hpp"

namespace ccsg {

struct EvalReport {
    double accuracy = 0.0;        // statement level
    double group_accuracy = 0.0;  // share of groups with every member correct
    std::size_t n_statements = 0;
    std::size_t n_groups = 0;
    std::size_t n_true = 0;
    std::size_t n_false = 0;
    double threshold = 0.5;
    std::optional<double> paired_consistency;
};

// z > 0 predicts true, z <= 0 predicts false. Throws on an empty
// dataset. `threads` splits the scoring; results are identical for any
// thread count.
EvalReport accuracy(const PEModelParams& params, const std::vector<StatementGroup>& groups,
                    std::size_t threads = 1);

struct StatementPair {
    std::string pair_id;
    Statement first;
    Statement second;  // labels must differ within the pair
};

// Fraction of pairs with both members classified correctly.
double paired_consistency(const PEModelParams& params, const std::vector<StatementPair>& pairs,
                          std::size_t threads = 1);

// Resolves a pairing index file (pair_id -> two statement ids) against
// loaded groups. Throws on unknown ids or same-label pairs.
std::vector<StatementPair> load_pairs(const std::vector<StatementGroup>& groups,
                                      const std::string& pairs_path);

struct ScoredStatement {
    Statement statement;
    double score = 0.0;
};

struct FilterResult {
    std::vector<ScoredStatement> retained;  // score strictly above threshold
    std::vector<ScoredStatement> rejected;
};

FilterResult filter_statements(const PEModelParams& params,
                               const std::vector<Statement>& statements, double threshold = 0.5,
                               std::size_t threads = 1);

enum class InterventionMode { keyword, context };

struct AceResult {
    double ace = 0.0;  // mean(score after) - mean(score before)
    double mean_before = 0.0;
    double mean_after = 0.0;
    std::size_t applied = 0;
    std::size_t skipped = 0;
};

// keyword mode swaps the top-ranked keyword for its nearest admissible
// neighbor; context mode swaps the first content token that is not the
// keyword. Statements with no applicable substitution are skipped and
// counted. Throws when nothing is applicable.
AceResult estimate_ace(const PEModelParams& params, const std::vector<Statement>& statements,
                       InterventionMode mode, const EmbeddingStore& store,
                       const ConstructorConfig& config,
                       const std::set<std::string>& stoplist = default_stoplist());

std::string serialize_report(const EvalReport& report, const std::string& config_hash);
std::string human_summary(const EvalReport& report);

}  // namespace ccsg
