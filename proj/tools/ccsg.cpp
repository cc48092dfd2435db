// ccsg: counterfactual sample construction, plausibility-model training
// and evaluation over newline-delimited statement corpora.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ccsg/attribution.hpp"
#include "ccsg/benchmark.hpp"
#include "ccsg/common.hpp"
#include "ccsg/config.hpp"
#include "ccsg/constructor.hpp"
#include "ccsg/embedding_store.hpp"
#include "ccsg/eval.hpp"
#include "ccsg/model.hpp"
#include "ccsg/text.hpp"
#include "ccsg/training.hpp"

namespace {

using nlohmann::json;

int log_level() {
    const char* env = std::getenv("CCSG_LOG");
    if (!env) return 1;
    const std::string v(env);
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
}

void info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[ccsg] " << msg << "\n";
}

struct Options {
    std::string config_path;
    std::string vectors_path;
    std::string data_path;
    std::string out_path;
    std::string checkpoint_path;
    std::string holdout_path;
    std::string pairs_path;
    std::string format = "statements";
    std::string mode = "keyword";
    double threshold = 0.5;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool no_ccsg = false;
    bool force = false;
    std::size_t threads = 1;
    long long epochs = -1;
    long long n_pairs = 300;
};

ccsg::DatasetFormat parse_format(const std::string& name) {
    if (name == "statements") return ccsg::DatasetFormat::statements;
    if (name == "multichoice") return ccsg::DatasetFormat::multichoice;
    throw std::runtime_error("unknown dataset format: " + name);
}

ccsg::TrainConfig resolve_train_config(const Options& opt) {
    ccsg::KeyValueConfig kv;
    if (!opt.config_path.empty()) kv = ccsg::KeyValueConfig::parse_file(opt.config_path);
    if (opt.seed_set) kv.set("seed", std::to_string(opt.seed));
    if (opt.epochs >= 0) kv.set("epochs", std::to_string(opt.epochs));
    if (opt.no_ccsg) kv.set("no_ccsg", "true");
    return ccsg::TrainConfig::from_config(kv);
}

// the resolved-invocation hash stamped into every artifact
std::string run_hash(const std::string& subcommand, const Options& opt,
                     const ccsg::TrainConfig* train_cfg) {
    ccsg::KeyValueConfig kv = train_cfg ? train_cfg->to_config() : ccsg::KeyValueConfig{};
    kv.set("subcommand", subcommand);
    if (!opt.vectors_path.empty()) kv.set("vectors", opt.vectors_path);
    if (!opt.data_path.empty()) kv.set("data", opt.data_path);
    if (!opt.out_path.empty()) kv.set("out", opt.out_path);
    if (!opt.checkpoint_path.empty()) kv.set("checkpoint", opt.checkpoint_path);
    if (!opt.holdout_path.empty()) kv.set("holdout", opt.holdout_path);
    if (!opt.pairs_path.empty()) kv.set("pairs", opt.pairs_path);
    kv.set("format", opt.format);
    if (subcommand == "ace") kv.set("mode", opt.mode);
    if (subcommand == "filter") kv.set("threshold", std::to_string(opt.threshold));
    if (subcommand == "genbench") {
        kv.set("n_pairs", std::to_string(opt.n_pairs));
        kv.set("seed", std::to_string(opt.seed_set ? opt.seed : 1));
    }
    return kv.hash();
}

std::vector<ccsg::Statement> flatten(const std::vector<ccsg::StatementGroup>& groups) {
    std::vector<ccsg::Statement> all;
    for (const auto& g : groups) {
        all.insert(all.end(), g.statements.begin(), g.statements.end());
    }
    return all;
}

void check_vkb_hash(const ccsg::CheckpointInfo& ckpt_info, const ccsg::EmbeddingStore& store,
                    bool force) {
    if (ckpt_info.vkb_hash.empty()) return;
    const std::string current = store.vocab_hash();
    if (current == ckpt_info.vkb_hash) return;
    if (force) {
        std::cerr << "[ccsg] warning: checkpoint VKB hash " << ckpt_info.vkb_hash
                  << " does not match " << current << "; continuing (--force)\n";
        return;
    }
    throw std::runtime_error("checkpoint was initialized from a different VKB (hash " +
                             ckpt_info.vkb_hash + ", dataset VKB " + current +
                             "); pass --force to evaluate anyway");
}

int cmd_genbench(const Options& opt) {
    ccsg::BenchmarkSpec spec = ccsg::BenchmarkSpec::defaults();
    spec.seed = opt.seed_set ? opt.seed : 1;
    spec.n_pairs = static_cast<std::size_t>(opt.n_pairs);
    const std::string hash = run_hash("genbench", opt, nullptr);
    std::cout << "config_hash=" << hash << "\n";

    std::filesystem::create_directories(opt.out_path);
    const auto vkb_path = (std::filesystem::path(opt.out_path) / "vkb.txt").string();
    ccsg::write_fixture_vkb(vkb_path);
    const auto store = ccsg::EmbeddingStore::load(vkb_path);
    const auto bench = ccsg::generate(spec, store);
    ccsg::write_benchmark(bench, opt.out_path, hash);

    std::cout << "train_pairs=" << bench.train_pairs.size()
              << " holdout_pairs=" << bench.holdout_pairs.size()
              << " train_agents=" << bench.train_agents.size()
              << " holdout_agents=" << bench.holdout_agents.size() << "\n";
    info("benchmark written to " + opt.out_path);
    return 0;
}

int cmd_train(const Options& opt) {
    ccsg::TrainConfig cfg = resolve_train_config(opt);
    const std::string hash = run_hash("train", opt, &cfg);
    std::cout << "config_hash=" << hash << "\n";

    const auto store = ccsg::EmbeddingStore::load(opt.vectors_path);
    const auto data = ccsg::load_dataset(opt.data_path, parse_format(opt.format), cfg.L);
    std::vector<ccsg::StatementGroup> holdout;
    const std::vector<ccsg::StatementGroup>* holdout_ptr = nullptr;
    if (!opt.holdout_path.empty()) {
        holdout = ccsg::load_dataset(opt.holdout_path, parse_format(opt.format), cfg.L);
        holdout_ptr = &holdout;
    }

    info("training on " + std::to_string(data.size()) + " groups");
    const auto result = ccsg::train(cfg, data, store, holdout_ptr, hash);

    const std::string ckpt = opt.out_path.empty() ? "model.ckpt" : opt.out_path;
    ccsg::save_checkpoint(result.params, ckpt,
                          {cfg.seed, hash, result.vkb_hash});
    const std::string metrics_path = ckpt + ".metrics.jsonl";
    std::ofstream metrics(metrics_path, std::ios::binary);
    if (!metrics) throw std::runtime_error("cannot write metrics: " + metrics_path);
    for (const auto& line : result.metrics_lines) metrics << line << "\n";

    for (const auto& e : result.epochs) {
        info("epoch " + std::to_string(e.epoch) + ": L=" + std::to_string(e.mean_total) +
             " L_bin=" + std::to_string(e.mean_binary) +
             " L_cot=" + std::to_string(e.mean_contrastive) +
             " holdout_acc=" + std::to_string(e.holdout_accuracy));
    }
    std::cout << "checkpoint=" << ckpt << " metrics=" << metrics_path << "\n";
    if (!result.epochs.empty() && result.epochs.back().holdout_accuracy >= 0.0) {
        std::cout << "holdout_accuracy=" << result.epochs.back().holdout_accuracy << "\n";
    }
    return 0;
}

int cmd_eval(const Options& opt) {
    const std::string hash = run_hash("eval", opt, nullptr);
    std::cout << "config_hash=" << hash << "\n";

    ccsg::CheckpointInfo ckpt_info;
    const auto params = ccsg::load_checkpoint(opt.checkpoint_path, &ckpt_info);
    if (!opt.vectors_path.empty()) {
        const auto store = ccsg::EmbeddingStore::load(opt.vectors_path);
        check_vkb_hash(ckpt_info, store, opt.force);
    }

    const auto data = ccsg::load_dataset(opt.data_path, parse_format(opt.format));
    ccsg::EvalReport report = ccsg::accuracy(params, data, opt.threads);
    if (!opt.pairs_path.empty()) {
        const auto pairs = ccsg::load_pairs(data, opt.pairs_path);
        report.paired_consistency = ccsg::paired_consistency(params, pairs, opt.threads);
    }

    const std::string line = ccsg::serialize_report(report, hash);
    if (!opt.out_path.empty()) {
        std::ofstream out(opt.out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write report: " + opt.out_path);
        out << line << "\n";
    }
    std::cout << line << "\n" << ccsg::human_summary(report);
    return 0;
}

int cmd_attribute(const Options& opt) {
    const std::string hash = run_hash("attribute", opt, nullptr);
    std::cout << "config_hash=" << hash << "\n";

    const auto params = ccsg::load_checkpoint(opt.checkpoint_path);
    const auto data = ccsg::load_dataset(opt.data_path, parse_format(opt.format));

    std::vector<std::pair<std::string, ccsg::ContributionEntry>> entries;
    for (const auto& g : data) {
        for (const auto& s : g.statements) {
            entries.emplace_back(s.id, ccsg::word_contribution(params, s));
        }
    }
    ccsg::emit_contribution_report(entries, opt.out_path, hash);
    std::cout << "report=" << opt.out_path << " statements=" << entries.size() << "\n";
    return 0;
}

int cmd_construct(const Options& opt) {
    ccsg::TrainConfig cfg = resolve_train_config(opt);
    const std::string hash = run_hash("construct", opt, &cfg);
    std::cout << "config_hash=" << hash << "\n";

    const auto params = ccsg::load_checkpoint(opt.checkpoint_path);
    const auto store = ccsg::EmbeddingStore::load(opt.vectors_path);
    const auto data = ccsg::load_dataset(opt.data_path, parse_format(opt.format), cfg.L);

    // offline pass: contributions come from the supplied checkpoint
    ccsg::ContributionMap contributions;
    std::vector<const ccsg::Statement*> anchors;
    for (const auto& g : data) {
        for (const auto& s : g.statements) {
            anchors.push_back(&s);
            contributions.by_id[s.id] = ccsg::word_contribution(params, s);
        }
    }
    ccsg::ConstructorConfig ctor_cfg = cfg.ctor;
    ctor_cfg.dropout_rate = cfg.R_p_drop;
    const auto aug =
        ccsg::construct(anchors, &contributions, ctor_cfg, store, cfg.seed, /*epoch=*/2);
    ccsg::write_augmented_corpus(opt.out_path, anchors, aug, hash);

    std::cout << "augmented=" << opt.out_path << " anchors=" << anchors.size()
              << " negatives=" << aug.counters.substitutions
              << " positives=" << aug.counters.positives
              << " shortfalls=" << aug.counters.neighbor_shortfall << "\n";
    return 0;
}

int cmd_filter(const Options& opt) {
    const std::string hash = run_hash("filter", opt, nullptr);
    std::cout << "config_hash=" << hash << "\n";

    const auto params = ccsg::load_checkpoint(opt.checkpoint_path);
    const auto statements = flatten(ccsg::load_dataset(opt.data_path, parse_format(opt.format)));
    const auto result = ccsg::filter_statements(params, statements, opt.threshold, opt.threads);

    auto write_list = [&](const std::string& path, const std::vector<ccsg::ScoredStatement>& list) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write: " + path);
        json meta;
        meta["_meta"] = {{"config_hash", hash}, {"threshold", opt.threshold}};
        out << meta.dump() << "\n";
        for (const auto& item : list) {
            json rec = json::parse(ccsg::statement_record(item.statement));
            rec["score"] = item.score;
            out << rec.dump() << "\n";
        }
    };
    const std::string base = opt.out_path.empty() ? "filtered" : opt.out_path;
    write_list(base + ".retained.jsonl", result.retained);
    write_list(base + ".rejected.jsonl", result.rejected);
    std::cout << "retained=" << result.retained.size() << " rejected=" << result.rejected.size()
              << " threshold=" << opt.threshold << "\n";
    return 0;
}

int cmd_ace(const Options& opt) {
    ccsg::TrainConfig cfg = resolve_train_config(opt);
    const std::string hash = run_hash("ace", opt, &cfg);
    std::cout << "config_hash=" << hash << "\n";

    const auto params = ccsg::load_checkpoint(opt.checkpoint_path);
    const auto store = ccsg::EmbeddingStore::load(opt.vectors_path);
    const auto statements = flatten(ccsg::load_dataset(opt.data_path, parse_format(opt.format)));

    const auto mode = opt.mode == "context" ? ccsg::InterventionMode::context
                                            : ccsg::InterventionMode::keyword;
    if (opt.mode != "keyword" && opt.mode != "context") {
        throw std::runtime_error("unknown intervention mode: " + opt.mode);
    }
    ccsg::ConstructorConfig ctor_cfg = cfg.ctor;
    const auto result = ccsg::estimate_ace(params, statements, mode, store, ctor_cfg);

    json rec;
    rec["mode"] = opt.mode;
    rec["ace"] = result.ace;
    rec["mean_before"] = result.mean_before;
    rec["mean_after"] = result.mean_after;
    rec["applied"] = result.applied;
    rec["skipped"] = result.skipped;
    rec["config_hash"] = hash;
    if (!opt.out_path.empty()) {
        std::ofstream out(opt.out_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write: " + opt.out_path);
        out << rec.dump() << "\n";
    }
    std::cout << rec.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"counterfactual sample construction and plausibility estimation"};
    app.require_subcommand(1);

    Options opt;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", opt.config_path, "flat key = value config file");
        sub->add_option("--seed", opt.seed, "global seed")->each([&](const std::string&) {
            opt.seed_set = true;
        });
        sub->add_option("--threads", opt.threads, "worker cap for scoring");
        sub->add_flag("--no-ccsg", opt.no_ccsg, "ablation: plain BCE training");
    };

    CLI::App* genbench = app.add_subcommand("genbench", "generate the synthetic paired benchmark");
    add_common(genbench);
    genbench->add_option("--out", opt.out_path, "output directory")->required();
    genbench->add_option("--pairs", opt.n_pairs, "total pair count");

    CLI::App* train = app.add_subcommand("train", "train a plausibility model");
    add_common(train);
    train->add_option("--data", opt.data_path, "training corpus")->required();
    train->add_option("--vectors", opt.vectors_path, "word-vector file")->required();
    train->add_option("--out", opt.out_path, "checkpoint path");
    train->add_option("--holdout", opt.holdout_path, "held-out corpus for per-epoch accuracy");
    train->add_option("--format", opt.format, "statements|multichoice");
    train->add_option("--epochs", opt.epochs, "epoch count override");

    CLI::App* eval = app.add_subcommand("eval", "score a corpus and report accuracy");
    add_common(eval);
    eval->add_option("--checkpoint", opt.checkpoint_path, "model checkpoint")->required();
    eval->add_option("--data", opt.data_path, "corpus to score")->required();
    eval->add_option("--pairs", opt.pairs_path, "pairing index for paired consistency");
    eval->add_option("--out", opt.out_path, "report path");
    eval->add_option("--vectors", opt.vectors_path, "VKB for the hash check");
    eval->add_option("--format", opt.format, "statements|multichoice");
    eval->add_flag("--force", opt.force, "continue on VKB hash mismatch");

    CLI::App* attribute = app.add_subcommand("attribute", "emit the word-contribution report");
    add_common(attribute);
    attribute->add_option("--checkpoint", opt.checkpoint_path)->required();
    attribute->add_option("--data", opt.data_path)->required();
    attribute->add_option("--out", opt.out_path, "TSV report path")->required();
    attribute->add_option("--format", opt.format, "statements|multichoice");

    CLI::App* construct = app.add_subcommand("construct", "emit an augmented corpus offline");
    add_common(construct);
    construct->add_option("--checkpoint", opt.checkpoint_path)->required();
    construct->add_option("--data", opt.data_path)->required();
    construct->add_option("--vectors", opt.vectors_path)->required();
    construct->add_option("--out", opt.out_path, "augmented corpus path")->required();
    construct->add_option("--format", opt.format, "statements|multichoice");

    CLI::App* filter = app.add_subcommand("filter", "split a corpus by plausibility score");
    add_common(filter);
    filter->add_option("--checkpoint", opt.checkpoint_path)->required();
    filter->add_option("--data", opt.data_path)->required();
    filter->add_option("--threshold", opt.threshold, "retention threshold (strict >)");
    filter->add_option("--out", opt.out_path, "output prefix");
    filter->add_option("--format", opt.format, "statements|multichoice");

    CLI::App* ace = app.add_subcommand("ace", "average causal effect of an intervention");
    add_common(ace);
    ace->add_option("--checkpoint", opt.checkpoint_path)->required();
    ace->add_option("--data", opt.data_path)->required();
    ace->add_option("--vectors", opt.vectors_path)->required();
    ace->add_option("--mode", opt.mode, "keyword|context");
    ace->add_option("--out", opt.out_path, "result path");
    ace->add_option("--format", opt.format, "statements|multichoice");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        json err;
        err["error"] = std::string("argument error: ") + e.what();
        err["exit_code"] = 1;
        std::cerr << err.dump() << "\n" << app.help() << "\n";
        return 1;
    }

    try {
        if (genbench->parsed()) return cmd_genbench(opt);
        if (train->parsed()) return cmd_train(opt);
        if (eval->parsed()) return cmd_eval(opt);
        if (attribute->parsed()) return cmd_attribute(opt);
        if (construct->parsed()) return cmd_construct(opt);
        if (filter->parsed()) return cmd_filter(opt);
        if (ace->parsed()) return cmd_ace(opt);
    } catch (const std::exception& e) {
        json err;
        err["error"] = e.what();
        err["exit_code"] = 1;
        std::cerr << err.dump() << "\n";
        return 1;
    }
    return 0;
}
