// Deterministic paired-commonsense benchmark with planted
// keyword -> plausibility rules. Every pair differs in exactly one slot
// token; held-out agents never appear in training.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ccsg/embedding_store.hpp"
#include "ccsg/text.hpp"

namespace ccsg {

struct BenchmarkTemplate {
    std::string name;
    std::vector<std::string> tokens;  // "<agent>" / "<filler>" placeholders
    std::vector<std::string> tags;    // aligned POS tags
    // Filler twin pairs: .first is compatible with the first agent
    // class, .second with the second.
    std::vector<std::pair<std::string, std::string>> fillers;
};

struct BenchmarkSpec {
    std::uint64_t seed = 1;
    std::size_t n_pairs = 300;              // total, train + held-out
    double holdout_pair_fraction = 1.0 / 3;
    double holdout_agent_fraction = 1.0 / 3;
    // Share of training pairs whose agent comes from the first class;
    // the planted spurious cue that counterfactual training must break.
    double train_class_bias = 0.75;

    std::vector<std::string> class_names{"aquatic", "aerial"};
    // Agent twin pairs: .first in class 0, .second in class 1.
    std::vector<std::pair<std::string, std::string>> agents;
    std::vector<BenchmarkTemplate> templates;
    // (class name, filler token) -> plausible
    std::map<std::pair<std::string, std::string>, bool> compatibility;

    static BenchmarkSpec defaults();

    // Rebuilds the compatibility table from templates/class order.
    void derive_compatibility();

    bool plausible(const std::string& agent_class, const std::string& filler) const;
    std::vector<std::string> vocabulary() const;  // sorted, unique
};

struct PairRecord {
    std::string pair_id;
    std::string first_id;
    std::string second_id;
};

struct GeneratedBenchmark {
    std::vector<StatementGroup> train_groups;    // one pair per group
    std::vector<StatementGroup> holdout_groups;
    std::vector<PairRecord> train_pairs;
    std::vector<PairRecord> holdout_pairs;
    std::vector<std::string> train_agents;
    std::vector<std::string> holdout_agents;
};

// Deterministic in spec.seed. Throws when a vocabulary token is missing
// from the store or the agent pool cannot cover the requested counts.
GeneratedBenchmark generate(const BenchmarkSpec& spec, const EmbeddingStore& store);

// Writes train.jsonl / holdout.jsonl plus the two pairing index files
// into `dir`.
void write_benchmark(const GeneratedBenchmark& bench, const std::string& dir,
                     const std::string& config_hash = "");

// The shipped fixture VKB (data/fixture_vkb.txt): class-coded agent and
// filler vectors with cross-class twins as mutual nearest neighbors.
void write_fixture_vkb(const std::string& path);

}  // namespace ccsg
