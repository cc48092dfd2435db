#include "ccsg/constructor.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ccsg/common.hpp"

namespace ccsg {

using nlohmann::json;

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

bool shares_prefix4(const std::string& a, const std::string& b) {
    if (a.size() < 4 || b.size() < 4) return false;
    return a.compare(0, 4, b, 0, 4) == 0;
}

}  // namespace

void ConstructorConfig::validate() const {
    if (initial_set_size == 0) throw std::invalid_argument("initial_set_size must be positive");
    if (top_k == 0) throw std::invalid_argument("top_k must be positive");
    if (top_k > initial_set_size) {
        throw std::invalid_argument("top_k cannot exceed initial_set_size");
    }
    if (neighbors_per_keyword == 0) {
        throw std::invalid_argument("neighbors_per_keyword must be positive");
    }
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw std::invalid_argument("dropout rate must be in [0,1)");
    }
}

void ConstructorCounters::add(const ConstructorCounters& other) {
    neighbor_shortfall += other.neighbor_shortfall;
    anchors_without_nouns += other.anchors_without_nouns;
    substitutions += other.substitutions;
    positives += other.positives;
}

std::vector<std::size_t> select_initial_entities(const Statement& statement,
                                                 const EmbeddingStore& store,
                                                 std::size_t initial_set_size,
                                                 const std::set<std::string>& stoplist) {
    const auto nouns = extract_nouns(statement, store, stoplist);

    // positions of every in-vocabulary token, for the centroid
    std::vector<std::size_t> in_vocab;
    for (std::size_t i = 0; i < statement.tokens.size(); ++i) {
        if (store.contains(statement.tokens[i])) in_vocab.push_back(i);
    }

    struct Scored {
        std::size_t position;
        double score;
    };
    std::vector<Scored> scored;
    std::vector<double> centroid(store.dim());
    for (std::size_t noun : nouns) {
        if (!store.contains(statement.tokens[noun])) continue;
        std::fill(centroid.begin(), centroid.end(), 0.0);
        std::size_t count = 0;
        for (std::size_t pos : in_vocab) {
            if (pos == noun) continue;
            auto vec = store.vector_of(statement.tokens[pos]);
            for (std::size_t k = 0; k < centroid.size(); ++k) centroid[k] += vec[k];
            ++count;
        }
        if (count > 0) {
            for (double& x : centroid) x /= static_cast<double>(count);
        }
        scored.push_back({noun, cosine(store.vector_of(statement.tokens[noun]), centroid)});
    }

    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.position < b.position;
    });
    if (scored.size() > initial_set_size) scored.resize(initial_set_size);

    std::vector<std::size_t> result;
    result.reserve(scored.size());
    for (const auto& s : scored) result.push_back(s.position);
    return result;
}

std::vector<std::size_t> rank_keywords(const std::vector<std::size_t>& candidates,
                                       const ContributionEntry* entry, std::size_t top_k) {
    if (entry == nullptr) {
        throw std::runtime_error(
            "rank_keywords: no contribution entry for this statement (first-epoch misuse)");
    }
    for (std::size_t idx : candidates) {
        if (idx >= entry->scores.size()) {
            throw std::runtime_error("rank_keywords: contributions not aligned to statement");
        }
    }
    std::vector<std::size_t> ranked = candidates;
    std::sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) {
        if (entry->scores[a] != entry->scores[b]) return entry->scores[a] > entry->scores[b];
        return a < b;
    });
    if (ranked.size() > top_k) ranked.resize(top_k);
    return ranked;
}

std::vector<EmbeddingStore::Neighbor> admissible_neighbors(const EmbeddingStore& store,
                                                           const std::string& keyword,
                                                           std::size_t n,
                                                           const std::set<std::string>& stoplist) {
    std::vector<EmbeddingStore::Neighbor> admitted;
    std::size_t k = n + 16;
    const std::size_t max_candidates = store.size();
    while (true) {
        const std::size_t ask = std::min(k, max_candidates);
        auto ranked = store.nearest(keyword, ask);
        admitted.clear();
        for (const auto& cand : ranked) {
            if (stoplist.count(cand.token)) continue;
            if (shares_prefix4(cand.token, keyword)) continue;
            admitted.push_back(cand);
            if (admitted.size() == n) return admitted;
        }
        if (ranked.size() < ask || ask == max_candidates) return admitted;  // vocabulary exhausted
        k *= 4;
    }
}

std::vector<CounterfactualNegative> substitute(const Statement& anchor, std::size_t keyword_idx,
                                               const EmbeddingStore& store, std::size_t n,
                                               const std::set<std::string>& stoplist,
                                               ConstructorCounters& counters) {
    if (keyword_idx >= anchor.tokens.size()) {
        throw std::out_of_range("substitute: keyword index out of range");
    }
    const std::string& keyword = anchor.tokens[keyword_idx];
    if (!store.contains(keyword)) {
        throw std::out_of_range("substitute: keyword not in store: " + keyword);
    }

    auto neighbors = admissible_neighbors(store, keyword, n, stoplist);
    if (neighbors.size() < n) ++counters.neighbor_shortfall;

    std::vector<CounterfactualNegative> result;
    result.reserve(neighbors.size());
    for (std::size_t j = 0; j < neighbors.size(); ++j) {
        CounterfactualNegative neg;
        neg.statement = anchor;
        neg.statement.tokens[keyword_idx] = neighbors[j].token;
        neg.statement.text = join_tokens(neg.statement.tokens);
        neg.statement.label = !anchor.label;
        neg.statement.origin = Origin::cf_neg;
        neg.statement.id =
            anchor.id + "#neg" + std::to_string(keyword_idx) + "_" + std::to_string(j);
        neg.provenance = {keyword_idx, keyword, neighbors[j].token, neighbors[j].similarity};
        result.push_back(std::move(neg));
        ++counters.substitutions;
    }
    return result;
}

PositiveView make_positive(const Statement& anchor, double dropout_rate, std::uint64_t seed) {
    if (dropout_rate <= 0.0 || dropout_rate >= 1.0) {
        throw std::invalid_argument("make_positive: dropout rate must be in (0,1)");
    }
    return PositiveView{anchor.id, seed, dropout_rate};
}

Augmentation construct(const std::vector<const Statement*>& anchors,
                       const ContributionMap* prev_epoch_contributions,
                       const ConstructorConfig& config, const EmbeddingStore& store,
                       std::uint64_t global_seed, int epoch,
                       const std::set<std::string>& stoplist) {
    config.validate();
    Augmentation aug;
    aug.per_anchor.reserve(anchors.size());

    for (const Statement* anchor : anchors) {
        CounterfactualSet set;
        set.anchor_id = anchor->id;

        if (config.dropout_rate > 0.0) {
            const std::uint64_t seed =
                mix_seed(global_seed, static_cast<std::uint64_t>(epoch), fnv1a64(anchor->id));
            set.positives.push_back(make_positive(*anchor, config.dropout_rate, seed));
            ++aug.counters.positives;
        }

        if (prev_epoch_contributions != nullptr) {
            auto candidates =
                select_initial_entities(*anchor, store, config.initial_set_size, stoplist);
            if (candidates.empty()) {
                ++aug.counters.anchors_without_nouns;
            } else {
                const ContributionEntry* entry = prev_epoch_contributions->find(anchor->id);
                auto keywords = rank_keywords(candidates, entry, config.top_k);
                for (std::size_t kw : keywords) {
                    auto negs = substitute(*anchor, kw, store, config.neighbors_per_keyword,
                                           stoplist, aug.counters);
                    for (auto& n : negs) set.negatives.push_back(std::move(n));
                }
            }
        }
        aug.per_anchor.push_back(std::move(set));
    }
    return aug;
}

void write_augmented_corpus(const std::string& path,
                            const std::vector<const Statement*>& anchors,
                            const Augmentation& augmentation, const std::string& config_hash) {
    if (anchors.size() != augmentation.per_anchor.size()) {
        throw std::invalid_argument("write_augmented_corpus: anchors/augmentation mismatch");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write corpus: " + path);
    if (!config_hash.empty()) {
        json meta;
        meta["_meta"] = {{"config_hash", config_hash}, {"format", "statements+counterfactuals"}};
        out << meta.dump() << "\n";
    }
    for (std::size_t i = 0; i < anchors.size(); ++i) {
        out << statement_record(*anchors[i]) << "\n";
        const auto& set = augmentation.per_anchor[i];
        for (std::size_t j = 0; j < set.positives.size(); ++j) {
            const auto& pos = set.positives[j];
            json rec;
            rec["id"] = anchors[i]->id + "#pos" + std::to_string(j);
            rec["text"] = anchors[i]->text;
            rec["label"] = anchors[i]->label;
            rec["group"] = anchors[i]->group_id;
            rec["origin"] = "cf_pos";
            rec["ref"] = pos.anchor_id;
            rec["dropout_seed"] = pos.dropout_seed;
            rec["dropout_rate"] = pos.dropout_rate;
            out << rec.dump() << "\n";
        }
        for (const auto& neg : set.negatives) {
            json rec = json::parse(statement_record(neg.statement));
            rec["ref"] = set.anchor_id;
            rec["provenance"] = {{"position", neg.provenance.position},
                                 {"original", neg.provenance.original},
                                 {"replacement", neg.provenance.replacement},
                                 {"similarity", neg.provenance.similarity}};
            out << rec.dump() << "\n";
        }
    }
    if (!out) throw std::runtime_error("corpus write failed: " + path);
}

}  // namespace ccsg
