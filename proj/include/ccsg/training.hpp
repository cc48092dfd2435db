// Batch assembly, the binary and supervised-contrastive losses, the
// Adam update and the epoch loop with per-epoch contribution recording.
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ccsg/attribution.hpp"
#include "ccsg/config.hpp"
#include "ccsg/constructor.hpp"
#include "ccsg/embedding_store.hpp"
#include "ccsg/model.hpp"
#include "ccsg/text.hpp"

namespace ccsg {

struct TrainConfig {
    std::size_t L = kDefaultMaxTokens;  // max tokens per statement
    std::size_t B_G = 4;                // groups per batch
    std::size_t B_S = 8;                // golden statements per batch
    double R_p_drop = 0.05;
    double alpha = 1.0;   // binary loss weight
    double beta = 0.25;   // contrastive loss weight
    double tau = 0.05;    // contrastive temperature
    double eta = 1e-3;    // learning rate
    std::size_t epochs = 10;
    std::uint64_t seed = 1;
    bool no_ccsg = false;
    std::size_t hidden = 64;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double holdout_fraction = 0.1;  // used only when no holdout set is supplied
    ConstructorConfig ctor;

    void validate() const;  // throws std::invalid_argument

    static TrainConfig from_config(const KeyValueConfig& kv);
    KeyValueConfig to_config() const;
};

struct BinaryLossResult {
    double loss = 0.0;
    double d_ds = 0.0;
};

// Binary cross-entropy of score s against label y, with its exact
// derivative. Requires s strictly inside (0,1).
BinaryLossResult binary_loss(double s, bool y);

struct ContrastiveResult {
    double loss = 0.0;
    std::vector<double> d_anchor;                // wrt h_i
    std::vector<std::vector<double>> d_positives;
    std::vector<std::vector<double>> d_negatives;
};

// Supervised contrastive loss of one anchor against its positive and
// negative representation sets, log-sum-exp stabilized, with exact
// gradients through the cosine. Empty negatives give exactly 0 loss and
// zero gradients. Throws on tau <= 0, empty positives, or a zero-norm
// representation.
ContrastiveResult contrastive_loss(std::span<const double> h_anchor,
                                   const std::vector<std::span<const double>>& positives,
                                   const std::vector<std::span<const double>>& negatives,
                                   double tau);

double total_loss(double mean_binary, double mean_contrastive, double alpha, double beta);

// Shuffles groups by seed, then greedily packs whole groups while
// staying within B_G groups and B_S statements. A single group larger
// than B_S becomes its own oversized batch (counted, never split).
std::vector<std::vector<std::size_t>> make_batches(const std::vector<StatementGroup>& groups,
                                                   std::size_t B_G, std::size_t B_S,
                                                   std::uint64_t seed,
                                                   std::size_t* oversized_batches = nullptr);

struct AdamState {
    Gradients m, v;
    std::uint64_t t = 0;

    static AdamState zeros_like(const PEModelParams& params);
    void step(PEModelParams& params, const Gradients& g, double eta, double beta1, double beta2,
              double eps);
};

struct TrainCounters {
    std::size_t neighbor_shortfall = 0;
    std::size_t anchors_without_nouns = 0;
    std::size_t substitutions = 0;
    std::size_t positives = 0;
    std::size_t empty_positive_skips = 0;  // anchors with no same-label member
    std::size_t oversized_batches = 0;
};

struct EpochStats {
    int epoch = 0;
    double mean_binary = 0.0;
    double mean_contrastive = 0.0;
    double mean_total = 0.0;
    double holdout_accuracy = -1.0;  // -1 when no holdout statements exist
};

struct TrainResult {
    PEModelParams params;
    std::vector<std::string> metrics_lines;  // newline-delimited records
    std::vector<EpochStats> epochs;
    TrainCounters counters;
    std::string config_hash;
    std::string vkb_hash;
};

// Full training run. When `holdout` is null a deterministic
// holdout_fraction share of the groups is carved out for the per-epoch
// accuracy line. With no_ccsg the constructor is bypassed entirely and
// the objective reduces to plain BCE.
TrainResult train(const TrainConfig& config, const std::vector<StatementGroup>& data,
                  const EmbeddingStore& store,
                  const std::vector<StatementGroup>* holdout = nullptr,
                  const std::string& config_hash = "");

}  // namespace ccsg
