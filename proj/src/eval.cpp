#include "ccsg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "ccsg/attribution.hpp"

namespace ccsg {

using nlohmann::json;

namespace {

// Scores each statement independently; identical output for any thread
// count since every slot is written exactly once.
std::vector<double> score_logits(const PEModelParams& params,
                                 const std::vector<const Statement*>& statements,
                                 std::size_t threads) {
    std::vector<double> z(statements.size());
    auto run = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            z[i] = forward(params, *statements[i]).z;
        }
    };
    if (threads <= 1 || statements.size() < 2 * threads) {
        run(0, statements.size());
        return z;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (statements.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t begin = t * chunk;
        const std::size_t end = std::min(statements.size(), begin + chunk);
        if (begin >= end) break;
        pool.emplace_back(run, begin, end);
    }
    for (auto& th : pool) th.join();
    return z;
}

double sigmoid_of_logit(double z) {
    const double zc = std::clamp(z, -kLogitClamp, kLogitClamp);
    return 1.0 / (1.0 + std::exp(-zc));
}

bool content_token(const std::string& tok, const EmbeddingStore& store,
                   const std::set<std::string>& stoplist) {
    const bool alpha =
        !tok.empty() && std::all_of(tok.begin(), tok.end(), [](char c) { return c >= 'a' && c <= 'z'; });
    return alpha && !stoplist.count(tok) && store.contains(tok);
}

}  // namespace

EvalReport accuracy(const PEModelParams& params, const std::vector<StatementGroup>& groups,
                    std::size_t threads) {
    std::vector<const Statement*> statements;
    std::vector<std::size_t> group_of;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        for (const auto& s : groups[g].statements) {
            statements.push_back(&s);
            group_of.push_back(g);
        }
    }
    if (statements.empty()) throw std::runtime_error("accuracy: empty dataset");

    const auto z = score_logits(params, statements, threads);

    EvalReport report;
    report.n_statements = statements.size();
    report.n_groups = groups.size();
    std::vector<bool> group_ok(groups.size(), true);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < statements.size(); ++i) {
        // z > 0 predicts true; the tie z == 0 predicts false
        const bool predicted = z[i] > 0.0;
        (statements[i]->label ? report.n_true : report.n_false) += 1;
        if (predicted == statements[i]->label) {
            ++correct;
        } else {
            group_ok[group_of[i]] = false;
        }
    }
    report.accuracy = static_cast<double>(correct) / static_cast<double>(statements.size());
    std::size_t groups_ok = 0;
    for (bool ok : group_ok) groups_ok += ok ? 1 : 0;
    report.group_accuracy = static_cast<double>(groups_ok) / static_cast<double>(groups.size());
    return report;
}

double paired_consistency(const PEModelParams& params, const std::vector<StatementPair>& pairs,
                          std::size_t threads) {
    if (pairs.empty()) throw std::runtime_error("paired_consistency: no pairs");
    std::vector<const Statement*> statements;
    statements.reserve(pairs.size() * 2);
    for (const auto& p : pairs) {
        if (p.first.label == p.second.label) {
            throw std::runtime_error("paired_consistency: pair '" + p.pair_id +
                                     "' members share a label");
        }
        statements.push_back(&p.first);
        statements.push_back(&p.second);
    }
    const auto z = score_logits(params, statements, threads);
    std::size_t both = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const bool a_ok = (z[2 * i] > 0.0) == pairs[i].first.label;
        const bool b_ok = (z[2 * i + 1] > 0.0) == pairs[i].second.label;
        if (a_ok && b_ok) ++both;
    }
    return static_cast<double>(both) / static_cast<double>(pairs.size());
}

std::vector<StatementPair> load_pairs(const std::vector<StatementGroup>& groups,
                                      const std::string& pairs_path) {
    std::unordered_map<std::string, const Statement*> by_id;
    for (const auto& g : groups) {
        for (const auto& s : g.statements) by_id.emplace(s.id, &s);
    }

    std::ifstream in(pairs_path);
    if (!in) throw std::runtime_error("cannot open pairs file: " + pairs_path);

    std::vector<StatementPair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("pairs line " + std::to_string(line_no) + ": " + e.what());
        }
        if (rec.contains("_meta")) continue;
        const std::string pair_id = rec.at("pair_id").get<std::string>();
        const std::string first_id = rec.at("first").get<std::string>();
        const std::string second_id = rec.at("second").get<std::string>();
        auto a = by_id.find(first_id);
        auto b = by_id.find(second_id);
        if (a == by_id.end() || b == by_id.end()) {
            throw std::runtime_error("pair '" + pair_id + "' references a statement missing "
                                     "from the dataset");
        }
        if (a->second->label == b->second->label) {
            throw std::runtime_error("pair '" + pair_id + "' members share a label");
        }
        pairs.push_back({pair_id, *a->second, *b->second});
    }
    if (pairs.empty()) throw std::runtime_error("pairs file has no records: " + pairs_path);
    return pairs;
}

FilterResult filter_statements(const PEModelParams& params,
                               const std::vector<Statement>& statements, double threshold,
                               std::size_t threads) {
    FilterResult result;
    if (statements.empty()) return result;
    std::vector<const Statement*> ptrs;
    ptrs.reserve(statements.size());
    for (const auto& s : statements) ptrs.push_back(&s);
    const auto z = score_logits(params, ptrs, threads);
    for (std::size_t i = 0; i < statements.size(); ++i) {
        const double score = sigmoid_of_logit(z[i]);
        // strictly greater: a score equal to the threshold is rejected
        if (score > threshold) {
            result.retained.push_back({statements[i], score});
        } else {
            result.rejected.push_back({statements[i], score});
        }
    }
    return result;
}

AceResult estimate_ace(const PEModelParams& params, const std::vector<Statement>& statements,
                       InterventionMode mode, const EmbeddingStore& store,
                       const ConstructorConfig& config, const std::set<std::string>& stoplist) {
    AceResult result;
    double sum_before = 0.0, sum_after = 0.0;

    for (const auto& stmt : statements) {
        const auto candidates =
            select_initial_entities(stmt, store, config.initial_set_size, stoplist);
        if (candidates.empty()) {
            ++result.skipped;
            continue;
        }
        const ContributionEntry contrib = word_contribution(params, stmt);
        const auto keywords = rank_keywords(candidates, &contrib, 1);
        const std::size_t keyword_pos = keywords.front();

        std::size_t target_pos = keyword_pos;
        std::string replacement;
        if (mode == InterventionMode::keyword) {
            auto nbrs = admissible_neighbors(store, stmt.tokens[keyword_pos], 1, stoplist);
            if (nbrs.empty()) {
                ++result.skipped;
                continue;
            }
            replacement = nbrs.front().token;
        } else {
            bool found = false;
            for (std::size_t p = 0; p < stmt.tokens.size() && !found; ++p) {
                if (p == keyword_pos) continue;
                if (!content_token(stmt.tokens[p], store, stoplist)) continue;
                auto nbrs = admissible_neighbors(store, stmt.tokens[p], 1, stoplist);
                if (nbrs.empty()) continue;
                target_pos = p;
                replacement = nbrs.front().token;
                found = true;
            }
            if (!found) {
                ++result.skipped;
                continue;
            }
        }

        const double before = forward(params, stmt).s;
        std::vector<std::string> intervened = stmt.tokens;
        intervened[target_pos] = replacement;
        const double after = forward(params, std::span<const std::string>(intervened)).s;

        sum_before += before;
        sum_after += after;
        ++result.applied;
    }

    if (result.applied == 0) {
        throw std::runtime_error("estimate_ace: no applicable statements");
    }
    result.mean_before = sum_before / static_cast<double>(result.applied);
    result.mean_after = sum_after / static_cast<double>(result.applied);
    result.ace = result.mean_after - result.mean_before;
    return result;
}

std::string serialize_report(const EvalReport& report, const std::string& config_hash) {
    json rec;
    rec["accuracy"] = report.accuracy;
    rec["group_accuracy"] = report.group_accuracy;
    rec["n_statements"] = report.n_statements;
    rec["n_groups"] = report.n_groups;
    rec["n_true"] = report.n_true;
    rec["n_false"] = report.n_false;
    rec["threshold"] = report.threshold;
    if (report.paired_consistency) rec["paired_consistency"] = *report.paired_consistency;
    if (!config_hash.empty()) rec["config_hash"] = config_hash;
    return rec.dump();
}

std::string human_summary(const EvalReport& report) {
    std::ostringstream out;
    out << "statements : " << report.n_statements << " (" << report.n_true << " true, "
        << report.n_false << " false)\n"
        << "groups     : " << report.n_groups << "\n"
        << "accuracy   : " << report.accuracy << "\n"
        << "group acc  : " << report.group_accuracy << "\n";
    if (report.paired_consistency) {
        out << "paired consistency : " << *report.paired_consistency << "\n";
    }
    return out.str();
}

}  // namespace ccsg
