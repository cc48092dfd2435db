#include "ccsg/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <stdexcept>

#include <json.hpp>

#include "ccsg/common.hpp"

namespace ccsg {

using nlohmann::json;

namespace {

// shortest decimal string that round-trips the double
std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
        if (std::stod(buf) == v) break;
    }
    return buf;
}

double holdout_accuracy(const PEModelParams& params, const std::vector<StatementGroup>& groups) {
    std::size_t total = 0, correct = 0;
    for (const auto& g : groups) {
        for (const auto& s : g.statements) {
            ForwardCache cache = forward(params, s);
            const bool predicted = cache.z > 0.0;
            ++total;
            if (predicted == s.label) ++correct;
        }
    }
    return total == 0 ? -1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

struct Member {
    const Statement* stmt = nullptr;
    ForwardCache cache;
    bool label = false;
    bool golden = false;
};

void adam_update_array(std::vector<double>& theta, const std::vector<double>& g,
                       std::vector<double>& m, std::vector<double>& v, double lr_t, double beta1,
                       double beta2, double eps) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        theta[i] -= lr_t * m[i] / (std::sqrt(v[i]) + eps);
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (L == 0) throw std::invalid_argument("L must be positive");
    if (B_G == 0 || B_S == 0) throw std::invalid_argument("B_G and B_S must be positive");
    if (B_G > B_S) throw std::invalid_argument("B_G cannot exceed B_S");
    if (R_p_drop < 0.0 || R_p_drop >= 1.0) {
        throw std::invalid_argument("R_p_drop must be in [0,1)");
    }
    if (alpha < 0.0 || beta < 0.0) throw std::invalid_argument("alpha and beta must be >= 0");
    if (tau <= 0.0) throw std::invalid_argument("tau must be positive");
    if (eta <= 0.0) throw std::invalid_argument("eta must be positive");
    if (epochs == 0) throw std::invalid_argument("epochs must be positive");
    if (hidden == 0) throw std::invalid_argument("hidden width must be positive");
    if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) {
        throw std::invalid_argument("holdout_fraction must be in [0,1)");
    }
    if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0 ||
        adam_eps <= 0.0) {
        throw std::invalid_argument("bad Adam hyperparameters");
    }
    ctor.validate();
}

TrainConfig TrainConfig::from_config(const KeyValueConfig& kv) {
    TrainConfig c;
    c.L = static_cast<std::size_t>(kv.get_int("L", static_cast<long long>(c.L)));
    c.B_G = static_cast<std::size_t>(kv.get_int("B_G", static_cast<long long>(c.B_G)));
    c.B_S = static_cast<std::size_t>(kv.get_int("B_S", static_cast<long long>(c.B_S)));
    c.R_p_drop = kv.get_double("R_p_drop", c.R_p_drop);
    c.alpha = kv.get_double("alpha", c.alpha);
    c.beta = kv.get_double("beta", c.beta);
    c.tau = kv.get_double("tau", c.tau);
    c.eta = kv.get_double("eta", c.eta);
    c.epochs = static_cast<std::size_t>(kv.get_int("epochs", static_cast<long long>(c.epochs)));
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
    c.no_ccsg = kv.get_bool("no_ccsg", c.no_ccsg);
    c.hidden = static_cast<std::size_t>(kv.get_int("hidden", static_cast<long long>(c.hidden)));
    c.adam_beta1 = kv.get_double("adam_beta1", c.adam_beta1);
    c.adam_beta2 = kv.get_double("adam_beta2", c.adam_beta2);
    c.adam_eps = kv.get_double("adam_eps", c.adam_eps);
    c.holdout_fraction = kv.get_double("holdout_fraction", c.holdout_fraction);
    c.ctor.initial_set_size =
        static_cast<std::size_t>(kv.get_int("I", static_cast<long long>(c.ctor.initial_set_size)));
    c.ctor.top_k = static_cast<std::size_t>(kv.get_int("K", static_cast<long long>(c.ctor.top_k)));
    c.ctor.neighbors_per_keyword = static_cast<std::size_t>(kv.get_int(
        "neighbors_per_keyword", static_cast<long long>(c.ctor.neighbors_per_keyword)));
    c.ctor.dropout_rate = c.R_p_drop;
    c.validate();
    return c;
}

KeyValueConfig TrainConfig::to_config() const {
    KeyValueConfig kv;
    kv.set("L", std::to_string(L));
    kv.set("B_G", std::to_string(B_G));
    kv.set("B_S", std::to_string(B_S));
    kv.set("R_p_drop", format_double(R_p_drop));
    kv.set("alpha", format_double(alpha));
    kv.set("beta", format_double(beta));
    kv.set("tau", format_double(tau));
    kv.set("eta", format_double(eta));
    kv.set("epochs", std::to_string(epochs));
    kv.set("seed", std::to_string(seed));
    kv.set("no_ccsg", no_ccsg ? "true" : "false");
    kv.set("hidden", std::to_string(hidden));
    kv.set("adam_beta1", format_double(adam_beta1));
    kv.set("adam_beta2", format_double(adam_beta2));
    kv.set("adam_eps", format_double(adam_eps));
    kv.set("holdout_fraction", format_double(holdout_fraction));
    kv.set("I", std::to_string(ctor.initial_set_size));
    kv.set("K", std::to_string(ctor.top_k));
    kv.set("neighbors_per_keyword", std::to_string(ctor.neighbors_per_keyword));
    return kv;
}

BinaryLossResult binary_loss(double s, bool y) {
    if (!(s > 0.0 && s < 1.0)) {
        throw std::invalid_argument("binary_loss: score must be strictly inside (0,1)");
    }
    if (y) return {-std::log(s), -1.0 / s};
    return {-std::log(1.0 - s), 1.0 / (1.0 - s)};
}

ContrastiveResult contrastive_loss(std::span<const double> h_anchor,
                                   const std::vector<std::span<const double>>& positives,
                                   const std::vector<std::span<const double>>& negatives,
                                   double tau) {
    if (tau <= 0.0) throw std::invalid_argument("contrastive_loss: tau must be positive");

    ContrastiveResult result;
    result.d_anchor.assign(h_anchor.size(), 0.0);
    result.d_positives.assign(positives.size(), std::vector<double>(h_anchor.size(), 0.0));
    result.d_negatives.assign(negatives.size(), std::vector<double>(h_anchor.size(), 0.0));
    if (positives.empty()) return result;  // caller skips and counts

    auto norm_of = [](std::span<const double> v) {
        double n = 0.0;
        for (double x : v) n += x * x;
        return std::sqrt(n);
    };
    const double na = norm_of(h_anchor);
    if (na == 0.0) throw std::runtime_error("contrastive_loss: zero-norm representation");

    const std::size_t np = positives.size();
    const std::size_t nn = negatives.size();
    std::vector<double> cos_all(np + nn), norm_all(np + nn);
    auto member = [&](std::size_t k) { return k < np ? positives[k] : negatives[k - np]; };
    for (std::size_t k = 0; k < np + nn; ++k) {
        auto h = member(k);
        if (h.size() != h_anchor.size()) {
            throw std::invalid_argument("contrastive_loss: representation width mismatch");
        }
        norm_all[k] = norm_of(h);
        if (norm_all[k] == 0.0) {
            throw std::runtime_error("contrastive_loss: zero-norm representation");
        }
        cos_all[k] = cosine(h_anchor, h);
    }

    double shift = cos_all[0] / tau;
    for (std::size_t k = 1; k < np + nn; ++k) shift = std::max(shift, cos_all[k] / tau);

    std::vector<double> ex(np + nn);
    double sum_pos = 0.0, sum_all = 0.0;
    for (std::size_t k = 0; k < np + nn; ++k) {
        ex[k] = std::exp(cos_all[k] / tau - shift);
        sum_all += ex[k];
        if (k < np) sum_pos += ex[k];
    }
    result.loss = std::log(sum_all) - std::log(sum_pos);

    // d loss / d cos_k, then chain through the cosine
    const double inv_tau = 1.0 / tau;
    for (std::size_t k = 0; k < np + nn; ++k) {
        const double p_all = ex[k] / sum_all;
        const double p_pos = k < np ? ex[k] / sum_pos : 0.0;
        const double dcos = (p_all - p_pos) * inv_tau;
        if (dcos == 0.0) continue;

        auto h = member(k);
        const double nb = norm_all[k];
        const double c = cos_all[k];
        auto& dh = k < np ? result.d_positives[k] : result.d_negatives[k - np];
        for (std::size_t t = 0; t < h_anchor.size(); ++t) {
            result.d_anchor[t] += dcos * (h[t] / (na * nb) - c * h_anchor[t] / (na * na));
            dh[t] += dcos * (h_anchor[t] / (na * nb) - c * h[t] / (nb * nb));
        }
    }
    return result;
}

double total_loss(double mean_binary, double mean_contrastive, double alpha, double beta) {
    return alpha * mean_binary + beta * mean_contrastive;
}

std::vector<std::vector<std::size_t>> make_batches(const std::vector<StatementGroup>& groups,
                                                   std::size_t B_G, std::size_t B_S,
                                                   std::uint64_t seed,
                                                   std::size_t* oversized_batches) {
    if (groups.empty()) throw std::runtime_error("make_batches: empty dataset");
    if (B_G == 0 || B_S == 0) throw std::invalid_argument("make_batches: B_G and B_S must be > 0");

    std::vector<std::size_t> order(groups.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(mix_seed(seed, fnv1a64("batch-shuffle")));
    rng.shuffle(order);

    std::vector<std::vector<std::size_t>> batches;
    std::vector<std::size_t> current;
    std::size_t current_statements = 0;
    std::size_t oversized = 0;

    auto flush = [&]() {
        if (!current.empty()) {
            batches.push_back(std::move(current));
            current.clear();
            current_statements = 0;
        }
    };

    for (std::size_t gi : order) {
        const std::size_t g_size = groups[gi].statements.size();
        if (g_size > B_S) {
            flush();
            batches.push_back({gi});
            ++oversized;
            continue;
        }
        if (current.size() + 1 > B_G || current_statements + g_size > B_S) flush();
        current.push_back(gi);
        current_statements += g_size;
    }
    flush();

    if (oversized_batches) *oversized_batches = oversized;
    return batches;
}

AdamState AdamState::zeros_like(const PEModelParams& params) {
    AdamState st;
    st.m = Gradients::zeros_like(params);
    st.v = Gradients::zeros_like(params);
    return st;
}

void AdamState::step(PEModelParams& params, const Gradients& g, double eta, double beta1,
                     double beta2, double eps) {
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    // effective rate folds both bias corrections into one scalar
    const double lr_t = eta * std::sqrt(bc2) / bc1;

    adam_update_array(params.E, g.E, m.E, v.E, lr_t, beta1, beta2, eps);
    adam_update_array(params.W1, g.W1, m.W1, v.W1, lr_t, beta1, beta2, eps);
    adam_update_array(params.b1, g.b1, m.b1, v.b1, lr_t, beta1, beta2, eps);
    adam_update_array(params.w2, g.w2, m.w2, v.w2, lr_t, beta1, beta2, eps);
    m.b2 = beta1 * m.b2 + (1.0 - beta1) * g.b2;
    v.b2 = beta2 * v.b2 + (1.0 - beta2) * g.b2 * g.b2;
    params.b2 -= lr_t * m.b2 / (std::sqrt(v.b2) + eps);
}

TrainResult train(const TrainConfig& config, const std::vector<StatementGroup>& data,
                  const EmbeddingStore& store, const std::vector<StatementGroup>* holdout,
                  const std::string& config_hash) {
    config.validate();
    if (data.empty()) throw std::runtime_error("train: empty dataset");

    // holdout split (only when none was supplied)
    std::vector<StatementGroup> train_groups, holdout_groups;
    if (holdout != nullptr) {
        train_groups = data;
        holdout_groups = *holdout;
    } else {
        std::vector<std::size_t> order(data.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng rng(mix_seed(config.seed, fnv1a64("holdout-split")));
        rng.shuffle(order);
        const std::size_t n_holdout =
            static_cast<std::size_t>(config.holdout_fraction * static_cast<double>(data.size()));
        for (std::size_t i = 0; i < order.size(); ++i) {
            (i < n_holdout ? holdout_groups : train_groups).push_back(data[order[i]]);
        }
    }
    if (train_groups.empty()) throw std::runtime_error("train: no groups left for training");

    bool any_in_vocab = false;
    for (const auto& g : train_groups) {
        for (const auto& s : g.statements) {
            for (const auto& t : s.tokens) {
                if (store.contains(t)) {
                    any_in_vocab = true;
                    break;
                }
            }
        }
    }
    if (!any_in_vocab) {
        std::cerr << "[ccsg] warning: dataset and VKB vocabularies are disjoint; every token "
                     "maps to <unk>\n";
    }

    TrainResult result;
    result.config_hash = config_hash;
    result.vkb_hash = store.vocab_hash();
    result.params = PEModelParams::init(store, config.hidden, config.seed);
    AdamState adam = AdamState::zeros_like(result.params);
    Gradients grads = Gradients::zeros_like(result.params);

    ConstructorConfig ctor_cfg = config.ctor;
    ctor_cfg.dropout_rate = config.R_p_drop;

    ContributionMap previous;  // from the last finished epoch

    if (!config_hash.empty()) {
        json meta;
        meta["_meta"] = {{"config_hash", config_hash}, {"vkb_hash", result.vkb_hash}};
        result.metrics_lines.push_back(meta.dump());
    }

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::size_t oversized = 0;
        auto batches = make_batches(train_groups, config.B_G, config.B_S,
                                    mix_seed(config.seed, fnv1a64("epoch-order"), epoch),
                                    &oversized);
        result.counters.oversized_batches += oversized;

        ContributionMap next;
        next.epoch_tag = static_cast<int>(epoch);

        double epoch_bin_sum = 0.0, epoch_cot_sum = 0.0;
        std::size_t epoch_golden = 0, epoch_eligible = 0;
        double epoch_total_weighted = 0.0;

        for (std::size_t bi = 0; bi < batches.size(); ++bi) {
            std::vector<const Statement*> golden;
            for (std::size_t gi : batches[bi]) {
                for (const auto& s : train_groups[gi].statements) golden.push_back(&s);
            }
            const std::size_t n_golden = golden.size();

            Augmentation aug;
            if (!config.no_ccsg) {
                aug = construct(golden, epoch >= 2 ? &previous : nullptr, ctor_cfg, store,
                                config.seed, static_cast<int>(epoch));
                result.counters.neighbor_shortfall += aug.counters.neighbor_shortfall;
                result.counters.anchors_without_nouns += aug.counters.anchors_without_nouns;
                result.counters.substitutions += aug.counters.substitutions;
                result.counters.positives += aug.counters.positives;
            }

            // realize members: goldens, then positives, then negatives
            std::vector<Member> members;
            members.reserve(n_golden * 3);
            for (const Statement* s : golden) {
                members.push_back({s, forward(result.params, *s), s->label, true});
            }
            std::vector<Statement> owned_negatives;
            if (!config.no_ccsg) {
                for (std::size_t a = 0; a < aug.per_anchor.size(); ++a) {
                    for (const auto& view : aug.per_anchor[a].positives) {
                        members.push_back({golden[a],
                                           forward(result.params, *golden[a], view.dropout_rate,
                                                   view.dropout_seed),
                                           golden[a]->label, false});
                    }
                }
                for (auto& set : aug.per_anchor) {
                    for (auto& neg : set.negatives) owned_negatives.push_back(neg.statement);
                }
                for (const Statement& neg : owned_negatives) {
                    members.push_back({&neg, forward(result.params, neg), neg.label, false});
                }
            }

            // binary loss over golden members; contribution readout rides
            // on the same backward call
            double batch_bin = 0.0;
            TokenGradients token_grads;
            for (std::size_t gi = 0; gi < n_golden; ++gi) {
                Member& mem = members[gi];
                const BinaryLossResult bl = binary_loss(mem.cache.s, mem.label);
                batch_bin += bl.loss;
                backward_accumulate(result.params, mem.cache, bl.d_ds, {},
                                    config.alpha / static_cast<double>(n_golden), grads,
                                    config.no_ccsg ? nullptr : &token_grads);
                if (!config.no_ccsg) {
                    const double p = prob_of_label(mem.cache, mem.label);
                    ContributionEntry entry;
                    entry.tokens = mem.stmt->tokens;
                    entry.epoch_tag = static_cast<int>(epoch);
                    entry.scores.reserve(token_grads.size());
                    for (const auto& tg : token_grads) {
                        double sum = 0.0;
                        for (double x : tg) sum += x;
                        entry.scores.push_back(-p * sum);
                    }
                    next.by_id[mem.stmt->id] = std::move(entry);
                }
            }
            const double mean_bin =
                n_golden == 0 ? 0.0 : batch_bin / static_cast<double>(n_golden);

            // supervised contrastive term over the augmented batch
            double mean_cot = 0.0;
            std::size_t eligible = 0;
            if (!config.no_ccsg) {
                std::vector<std::vector<std::size_t>> pos_sets(n_golden), neg_sets(n_golden);
                for (std::size_t i = 0; i < n_golden; ++i) {
                    for (std::size_t k = 0; k < members.size(); ++k) {
                        if (k == i) continue;
                        if (members[k].label == members[i].label) {
                            pos_sets[i].push_back(k);
                        } else {
                            neg_sets[i].push_back(k);
                        }
                    }
                    if (pos_sets[i].empty()) {
                        ++result.counters.empty_positive_skips;
                    } else {
                        ++eligible;
                    }
                }

                if (eligible > 0) {
                    const double w = config.beta / static_cast<double>(eligible);
                    std::vector<std::vector<double>> dh(members.size());
                    std::vector<bool> touched(members.size(), false);
                    auto add_dh = [&](std::size_t k, const std::vector<double>& g_vec) {
                        if (dh[k].empty()) dh[k].assign(result.params.H, 0.0);
                        for (std::size_t j = 0; j < g_vec.size(); ++j) dh[k][j] += w * g_vec[j];
                        touched[k] = true;
                    };

                    double cot_sum = 0.0;
                    for (std::size_t i = 0; i < n_golden; ++i) {
                        if (pos_sets[i].empty()) continue;
                        std::vector<std::span<const double>> pos, neg;
                        pos.reserve(pos_sets[i].size());
                        neg.reserve(neg_sets[i].size());
                        for (std::size_t k : pos_sets[i]) pos.emplace_back(members[k].cache.hidden);
                        for (std::size_t k : neg_sets[i]) neg.emplace_back(members[k].cache.hidden);
                        ContrastiveResult cr =
                            contrastive_loss(members[i].cache.hidden, pos, neg, config.tau);
                        cot_sum += cr.loss;
                        add_dh(i, cr.d_anchor);
                        for (std::size_t k = 0; k < pos_sets[i].size(); ++k) {
                            add_dh(pos_sets[i][k], cr.d_positives[k]);
                        }
                        for (std::size_t k = 0; k < neg_sets[i].size(); ++k) {
                            add_dh(neg_sets[i][k], cr.d_negatives[k]);
                        }
                    }
                    mean_cot = cot_sum / static_cast<double>(eligible);

                    for (std::size_t k = 0; k < members.size(); ++k) {
                        if (!touched[k]) continue;
                        backward_accumulate(result.params, members[k].cache, 0.0, dh[k], 1.0,
                                            grads, nullptr);
                    }
                }
            }

            const double batch_total = total_loss(mean_bin, mean_cot, config.alpha, config.beta);
            if (!std::isfinite(batch_total)) {
                throw std::runtime_error("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(bi) +
                                         " (L_bin=" + std::to_string(mean_bin) +
                                         ", L_cot=" + std::to_string(mean_cot) + ")");
            }

            adam.step(result.params, grads, config.eta, config.adam_beta1, config.adam_beta2,
                      config.adam_eps);
            grads.reset();
            if (!result.params.all_finite()) {
                throw std::runtime_error("train: non-finite parameter after update at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(bi));
            }

            epoch_bin_sum += batch_bin;
            epoch_golden += n_golden;
            epoch_cot_sum += mean_cot * static_cast<double>(eligible);
            epoch_eligible += eligible;
            epoch_total_weighted += batch_total;

            json row;
            row["epoch"] = epoch;
            row["batch"] = bi;
            row["L_bin"] = mean_bin;
            row["L_cot"] = mean_cot;
            row["L"] = batch_total;
            result.metrics_lines.push_back(row.dump());
        }

        EpochStats stats;
        stats.epoch = static_cast<int>(epoch);
        stats.mean_binary =
            epoch_golden == 0 ? 0.0 : epoch_bin_sum / static_cast<double>(epoch_golden);
        stats.mean_contrastive =
            epoch_eligible == 0 ? 0.0 : epoch_cot_sum / static_cast<double>(epoch_eligible);
        stats.mean_total = epoch_total_weighted / static_cast<double>(batches.size());
        stats.holdout_accuracy = holdout_accuracy(result.params, holdout_groups);
        result.epochs.push_back(stats);

        json row;
        row["epoch"] = epoch;
        row["batch"] = -1;
        row["L_bin"] = stats.mean_binary;
        row["L_cot"] = stats.mean_contrastive;
        row["L"] = stats.mean_total;
        row["holdout_accuracy"] = stats.holdout_accuracy;
        row["counters"] = {{"neighbor_shortfall", result.counters.neighbor_shortfall},
                           {"anchors_without_nouns", result.counters.anchors_without_nouns},
                           {"substitutions", result.counters.substitutions},
                           {"positives", result.counters.positives},
                           {"empty_positive_skips", result.counters.empty_positive_skips},
                           {"oversized_batches", result.counters.oversized_batches}};
        result.metrics_lines.push_back(row.dump());

        previous = std::move(next);
    }

    return result;
}

}  // namespace ccsg
