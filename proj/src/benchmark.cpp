#include "ccsg/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "ccsg/common.hpp"

namespace ccsg {

using nlohmann::json;

namespace {

constexpr std::uint64_t kVkbSeed = 0x6b5c9d2e17f04a83ULL;
constexpr std::size_t kVkbDim = 20;  // [0,1] agent class, [2,3] filler class, rest identity

const std::vector<std::pair<std::string, std::string>>& default_agents() {
    static const std::vector<std::pair<std::string, std::string>> agents = {
        {"fish", "bird"},       {"trout", "robin"},    {"salmon", "eagle"},
        {"shark", "sparrow"},   {"carp", "crow"},      {"cod", "owl"},
        {"pike", "hawk"},       {"eel", "finch"},      {"herring", "swallow"},
        {"tuna", "gull"},       {"minnow", "wren"},    {"perch", "dove"},
        {"bass", "falcon"},     {"flounder", "heron"}, {"halibut", "magpie"},
        {"grouper", "jay"},     {"snapper", "raven"},  {"catfish", "parrot"},
        {"sardine", "pigeon"},  {"mackerel", "swan"},  {"guppy", "stork"},
        {"koi", "crane"},       {"sturgeon", "lark"},  {"bream", "puffin"}};
    return agents;
}

std::vector<BenchmarkTemplate> default_templates() {
    BenchmarkTemplate actions;
    actions.name = "can";
    actions.tokens = {"the", "<agent>", "can", "<filler>"};
    actions.tags = {"DET", "NOUN", "AUX", "VERB"};
    actions.fillers = {{"swim", "fly"},     {"dive", "soar"},  {"paddle", "flutter"},
                       {"wade", "glide"},   {"splash", "hover"}, {"drift", "roost"}};

    BenchmarkTemplate habitat;
    habitat.name = "habitat";
    habitat.tokens = {"the", "<agent>", "lives", "in", "the", "<filler>"};
    habitat.tags = {"DET", "NOUN", "VERB", "ADP", "DET", "NOUN"};
    habitat.fillers = {{"water", "nest"}, {"sea", "sky"},    {"river", "tree"},
                       {"lake", "cliff"}, {"pond", "branch"}, {"reef", "cloud"}};
    return {actions, habitat};
}

const std::vector<std::string>& glue_tokens() {
    static const std::vector<std::string> glue = {"the", "can", "lives", "in"};
    return glue;
}

const std::vector<std::string>& extra_vkb_tokens() {
    static const std::vector<std::string> extra = {"run"};
    return extra;
}

struct Combo {
    std::string agent;
    std::size_t agent_class;
    std::size_t template_idx;
    std::size_t filler_idx;
};

std::vector<Combo> enumerate_combos(const std::vector<std::string>& agents,
                                    std::size_t agent_class, const BenchmarkSpec& spec) {
    std::vector<Combo> combos;
    for (const auto& agent : agents) {
        for (std::size_t t = 0; t < spec.templates.size(); ++t) {
            for (std::size_t f = 0; f < spec.templates[t].fillers.size(); ++f) {
                combos.push_back({agent, agent_class, t, f});
            }
        }
    }
    return combos;
}

Statement build_statement(const BenchmarkSpec& spec, const Combo& combo,
                          const std::string& filler, bool label, const std::string& id,
                          const std::string& group_id) {
    const BenchmarkTemplate& tpl = spec.templates[combo.template_idx];
    Statement s;
    s.id = id;
    s.group_id = group_id;
    s.label = label;
    s.tokens.reserve(tpl.tokens.size());
    for (const auto& tok : tpl.tokens) {
        if (tok == "<agent>") {
            s.tokens.push_back(combo.agent);
        } else if (tok == "<filler>") {
            s.tokens.push_back(filler);
        } else {
            s.tokens.push_back(tok);
        }
    }
    s.pos_tags = tpl.tags;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        if (i) s.text.push_back(' ');
        s.text += s.tokens[i];
    }
    return s;
}

void emit_pairs(const BenchmarkSpec& spec, const std::vector<Combo>& combos,
                const std::string& id_prefix, Rng& order_rng,
                std::vector<StatementGroup>& groups, std::vector<PairRecord>& pairs) {
    for (std::size_t j = 0; j < combos.size(); ++j) {
        const Combo& combo = combos[j];
        const auto& filler_pair = spec.templates[combo.template_idx].fillers[combo.filler_idx];
        const std::string& class_name = spec.class_names[combo.agent_class];
        const std::string& plausible_filler =
            combo.agent_class == 0 ? filler_pair.first : filler_pair.second;
        const std::string& implausible_filler =
            combo.agent_class == 0 ? filler_pair.second : filler_pair.first;
        if (!spec.plausible(class_name, plausible_filler) ||
            spec.plausible(class_name, implausible_filler)) {
            throw std::runtime_error("benchmark: compatibility table breaks the one-true-per-pair "
                                     "rule for agent class '" + class_name + "'");
        }

        const std::string pair_id = id_prefix + std::to_string(j);
        Statement a = build_statement(spec, combo, plausible_filler, true, pair_id + ".0", pair_id);
        Statement b =
            build_statement(spec, combo, implausible_filler, false, pair_id + ".1", pair_id);
        if (order_rng.next() & 1) std::swap(a, b);

        StatementGroup group;
        group.group_id = pair_id;
        group.statements.push_back(a);
        group.statements.push_back(b);
        groups.push_back(std::move(group));
        pairs.push_back({pair_id, a.id, b.id});
    }
}

}  // namespace

BenchmarkSpec BenchmarkSpec::defaults() {
    BenchmarkSpec spec;
    spec.agents = default_agents();
    spec.templates = default_templates();
    spec.derive_compatibility();
    return spec;
}

void BenchmarkSpec::derive_compatibility() {
    compatibility.clear();
    for (const auto& tpl : templates) {
        for (const auto& [first, second] : tpl.fillers) {
            compatibility[{class_names[0], first}] = true;
            compatibility[{class_names[1], first}] = false;
            compatibility[{class_names[0], second}] = false;
            compatibility[{class_names[1], second}] = true;
        }
    }
}

bool BenchmarkSpec::plausible(const std::string& agent_class, const std::string& filler) const {
    auto it = compatibility.find({agent_class, filler});
    if (it == compatibility.end()) {
        throw std::out_of_range("no compatibility entry for (" + agent_class + ", " + filler +
                                ")");
    }
    return it->second;
}

std::vector<std::string> BenchmarkSpec::vocabulary() const {
    std::vector<std::string> vocab;
    for (const auto& [a, b] : agents) {
        vocab.push_back(a);
        vocab.push_back(b);
    }
    for (const auto& tpl : templates) {
        for (const auto& tok : tpl.tokens) {
            if (tok != "<agent>" && tok != "<filler>") vocab.push_back(tok);
        }
        for (const auto& [a, b] : tpl.fillers) {
            vocab.push_back(a);
            vocab.push_back(b);
        }
    }
    std::sort(vocab.begin(), vocab.end());
    vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
    return vocab;
}

GeneratedBenchmark generate(const BenchmarkSpec& spec, const EmbeddingStore& store) {
    if (spec.class_names.size() != 2) {
        throw std::invalid_argument("benchmark: exactly two agent classes expected");
    }
    if (spec.agents.empty() || spec.templates.empty() || spec.n_pairs == 0) {
        throw std::invalid_argument("benchmark: agents, templates and n_pairs must be nonempty");
    }
    for (const auto& tpl : spec.templates) {
        if (tpl.tokens.size() != tpl.tags.size()) {
            throw std::invalid_argument("benchmark template '" + tpl.name +
                                        "': tags not aligned to tokens");
        }
        if (tpl.fillers.empty()) {
            throw std::invalid_argument("benchmark template '" + tpl.name + "': no fillers");
        }
    }
    for (const auto& token : spec.vocabulary()) {
        if (!store.contains(token)) {
            throw std::runtime_error("benchmark vocabulary token missing from VKB: " + token);
        }
    }

    // agents split by twin pair so no held-out agent is ever trained on
    std::vector<std::size_t> pair_order(spec.agents.size());
    for (std::size_t i = 0; i < pair_order.size(); ++i) pair_order[i] = i;
    Rng split_rng(mix_seed(spec.seed, fnv1a64("agent-split")));
    split_rng.shuffle(pair_order);

    const std::size_t n_holdout_pairs = static_cast<std::size_t>(
        std::llround(spec.holdout_pair_fraction * static_cast<double>(spec.n_pairs)));
    const std::size_t n_train_pairs = spec.n_pairs - n_holdout_pairs;

    std::size_t holdout_agent_pairs = static_cast<std::size_t>(
        std::llround(spec.holdout_agent_fraction * static_cast<double>(spec.agents.size())));
    if (n_holdout_pairs > 0 && holdout_agent_pairs == 0) holdout_agent_pairs = 1;
    if (n_train_pairs > 0 && holdout_agent_pairs >= spec.agents.size()) {
        holdout_agent_pairs = spec.agents.size() - 1;
    }

    GeneratedBenchmark bench;
    std::vector<std::string> train_class[2], holdout_class[2];
    for (std::size_t i = 0; i < pair_order.size(); ++i) {
        const auto& twin = spec.agents[pair_order[i]];
        if (i < holdout_agent_pairs) {
            holdout_class[0].push_back(twin.first);
            holdout_class[1].push_back(twin.second);
        } else {
            train_class[0].push_back(twin.first);
            train_class[1].push_back(twin.second);
        }
    }
    for (int c = 0; c < 2; ++c) {
        bench.train_agents.insert(bench.train_agents.end(), train_class[c].begin(),
                                  train_class[c].end());
        bench.holdout_agents.insert(bench.holdout_agents.end(), holdout_class[c].begin(),
                                    holdout_class[c].end());
    }

    auto draw_combos = [&](const std::vector<std::string>& agents, std::size_t agent_class,
                           std::size_t count, const char* stage) {
        auto combos = enumerate_combos(agents, agent_class, spec);
        if (combos.size() < count) {
            throw std::runtime_error(std::string("benchmark: not enough distinct ") + stage +
                                     " pairs for class '" + spec.class_names[agent_class] +
                                     "' (need " + std::to_string(count) + ", have " +
                                     std::to_string(combos.size()) + ")");
        }
        Rng rng(mix_seed(spec.seed, fnv1a64(stage), agent_class));
        rng.shuffle(combos);
        combos.resize(count);
        return combos;
    };

    // class-imbalanced training draw, balanced held-out draw
    const std::size_t n_train_first = std::min(
        n_train_pairs, static_cast<std::size_t>(std::llround(
                           spec.train_class_bias * static_cast<double>(n_train_pairs))));
    std::vector<Combo> train_combos =
        draw_combos(train_class[0], 0, n_train_first, "train");
    {
        auto second = draw_combos(train_class[1], 1, n_train_pairs - n_train_first, "train");
        train_combos.insert(train_combos.end(), second.begin(), second.end());
    }
    Rng train_order(mix_seed(spec.seed, fnv1a64("train-order")));
    train_order.shuffle(train_combos);

    std::vector<Combo> holdout_combos;
    if (n_holdout_pairs > 0) {
        const std::size_t nh0 = n_holdout_pairs / 2;
        holdout_combos = draw_combos(holdout_class[0], 0, nh0, "holdout");
        auto second = draw_combos(holdout_class[1], 1, n_holdout_pairs - nh0, "holdout");
        holdout_combos.insert(holdout_combos.end(), second.begin(), second.end());
        Rng holdout_order(mix_seed(spec.seed, fnv1a64("holdout-order")));
        holdout_order.shuffle(holdout_combos);
    }

    Rng member_order(mix_seed(spec.seed, fnv1a64("member-order")));
    emit_pairs(spec, train_combos, "tr", member_order, bench.train_groups, bench.train_pairs);
    emit_pairs(spec, holdout_combos, "ho", member_order, bench.holdout_groups,
               bench.holdout_pairs);
    return bench;
}

void write_benchmark(const GeneratedBenchmark& bench, const std::string& dir,
                     const std::string& config_hash) {
    std::filesystem::create_directories(dir);
    const auto base = std::filesystem::path(dir);
    save_groups((base / "train.jsonl").string(), bench.train_groups, config_hash);
    save_groups((base / "holdout.jsonl").string(), bench.holdout_groups, config_hash);

    auto write_pairs = [&](const std::string& path, const std::vector<PairRecord>& pairs) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write pairs file: " + path);
        if (!config_hash.empty()) {
            json meta;
            meta["_meta"] = {{"config_hash", config_hash}, {"format", "pairs"}};
            out << meta.dump() << "\n";
        }
        for (const auto& p : pairs) {
            json rec;
            rec["pair_id"] = p.pair_id;
            rec["first"] = p.first_id;
            rec["second"] = p.second_id;
            out << rec.dump() << "\n";
        }
        if (!out) throw std::runtime_error("pairs write failed: " + path);
    };
    write_pairs((base / "train_pairs.jsonl").string(), bench.train_pairs);
    write_pairs((base / "holdout_pairs.jsonl").string(), bench.holdout_pairs);
}

void write_fixture_vkb(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write fixture VKB: " + path);

    // identity noise dominates the class code so that surface identity is
    // the inviting cue and the planted compatibility rule stays subtle
    const double id_scale = 2.2;
    const double class_mag = 0.4;

    auto emit = [&](const std::string& token, const std::vector<double>& vec) {
        out << token;
        char buf[32];
        for (double x : vec) {
            std::snprintf(buf, sizeof(buf), " %.6f", x);
            out << buf;
        }
        out << "\n";
    };

    auto identity_noise = [&](Rng& rng, double scale) {
        std::vector<double> vec(kVkbDim, 0.0);
        for (std::size_t k = 4; k < kVkbDim; ++k) vec[k] = rng.next_gaussian() * scale;
        return vec;
    };

    const auto& agents = default_agents();
    for (std::size_t i = 0; i < agents.size(); ++i) {
        Rng rng(mix_seed(kVkbSeed, fnv1a64("agent"), i));
        auto base = identity_noise(rng, id_scale);
        auto first = base;
        first[0] = class_mag;
        first[1] = class_mag;
        auto second = base;
        second[0] = -class_mag;
        second[1] = -class_mag;
        emit(agents[i].first, first);
        emit(agents[i].second, second);
    }

    const auto templates = default_templates();
    for (std::size_t t = 0; t < templates.size(); ++t) {
        for (std::size_t f = 0; f < templates[t].fillers.size(); ++f) {
            Rng rng(mix_seed(kVkbSeed, fnv1a64("filler"), t * 100 + f));
            auto base = identity_noise(rng, id_scale);
            auto first = base;
            first[2] = class_mag;
            first[3] = class_mag;
            auto second = base;
            second[2] = -class_mag;
            second[3] = -class_mag;
            emit(templates[t].fillers[f].first, first);
            emit(templates[t].fillers[f].second, second);
        }
    }

    for (std::size_t i = 0; i < glue_tokens().size(); ++i) {
        Rng rng(mix_seed(kVkbSeed, fnv1a64("glue"), i));
        emit(glue_tokens()[i], identity_noise(rng, 0.3));
    }
    for (std::size_t i = 0; i < extra_vkb_tokens().size(); ++i) {
        Rng rng(mix_seed(kVkbSeed, fnv1a64("extra"), i));
        emit(extra_vkb_tokens()[i], identity_noise(rng, id_scale));
    }
    if (!out) throw std::runtime_error("fixture VKB write failed: " + path);
}

}  // namespace ccsg
