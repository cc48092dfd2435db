// Per-token word contributions (summed gradient of the correct-label
// probability with respect to each token embedding) and the report
// emitter for plotting contribution distributions.
#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ccsg/model.hpp"
#include "ccsg/text.hpp"

namespace ccsg {

struct ContributionEntry {
    std::vector<std::string> tokens;  // aligned to the statement
    std::vector<double> scores;
    int epoch_tag = 0;
};

struct ContributionMap {
    std::unordered_map<std::string, ContributionEntry> by_id;
    int epoch_tag = 0;

    const ContributionEntry* find(const std::string& statement_id) const;
};

// One deterministic forward plus one backward with upstream dP/ds; the
// score for position i is the component sum of dP(label)/de_i.
ContributionEntry word_contribution(const PEModelParams& params, const Statement& statement);

// Tab-separated table: statement_id, position, token, score,
// normalized score (score / sum of |scores| within the statement; 0
// when that sum is 0). Rows keep the input order.
void emit_contribution_report(
    const std::vector<std::pair<std::string, ContributionEntry>>& entries,
    const std::string& path, const std::string& config_hash = "");

}  // namespace ccsg
