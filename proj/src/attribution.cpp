#include "ccsg/attribution.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace ccsg {

const ContributionEntry* ContributionMap::find(const std::string& statement_id) const {
    auto it = by_id.find(statement_id);
    return it == by_id.end() ? nullptr : &it->second;
}

ContributionEntry word_contribution(const PEModelParams& params, const Statement& statement) {
    if (statement.tokens.empty()) {
        throw std::invalid_argument("word_contribution: empty statement");
    }
    ForwardCache cache = forward(params, statement, 0.0, 0);
    // upstream is dP(label)/ds: +1 for a true label, -1 for a false one
    const double d_p_d_s = statement.label ? 1.0 : -1.0;
    Gradients g = Gradients::zeros_like(params);
    TokenGradients token_grads;
    backward_accumulate(params, cache, d_p_d_s, {}, 1.0, g, &token_grads);

    ContributionEntry entry;
    entry.tokens = statement.tokens;
    entry.scores.reserve(token_grads.size());
    for (const auto& vec : token_grads) {
        double sum = 0.0;
        for (double x : vec) sum += x;
        entry.scores.push_back(sum);
    }
    return entry;
}

void emit_contribution_report(
    const std::vector<std::pair<std::string, ContributionEntry>>& entries,
    const std::string& path, const std::string& config_hash) {
    if (entries.empty()) {
        throw std::invalid_argument("emit_contribution_report: no entries");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    if (!config_hash.empty()) out << "# config_hash=" << config_hash << "\n";
    out << "statement_id\tposition\ttoken\tscore\tnormalized_score\n";
    for (const auto& [id, entry] : entries) {
        double denom = 0.0;
        for (double s : entry.scores) denom += std::abs(s);
        for (std::size_t i = 0; i < entry.scores.size(); ++i) {
            const double norm = denom == 0.0 ? 0.0 : entry.scores[i] / denom;
            out << id << "\t" << i << "\t" << entry.tokens[i] << "\t" << entry.scores[i] << "\t"
                << norm << "\n";
        }
    }
    if (!out) throw std::runtime_error("report write failed: " + path);
}

}  // namespace ccsg
