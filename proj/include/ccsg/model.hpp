// Plausibility-estimation model: embedding lookup with optional
// inverted dropout, mean pooling, one ReLU hidden layer, scalar head,
// sigmoid score. All arithmetic in double with exact hand-derived
// gradients.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ccsg/embedding_store.hpp"
#include "ccsg/text.hpp"

namespace ccsg {

// Logits are clamped to this range before the sigmoid so scores stay
// strictly inside (0,1).
inline constexpr double kLogitClamp = 30.0;

struct PEModelParams {
    std::size_t d = 0;  // embedding width
    std::size_t H = 0;  // hidden width

    std::vector<std::string> vocab;  // row -> token; last row is <unk>
    std::unordered_map<std::string, std::size_t> row_index;
    std::size_t unk_row = 0;

    std::vector<double> E;   // vocab x d
    std::vector<double> W1;  // d x H, row-major (input dim major)
    std::vector<double> b1;  // H
    std::vector<double> w2;  // H
    double b2 = 0.0;

    // Vocabulary = store tokens (store order) + one shared <unk> row.
    // Store rows copy the VKB vectors exactly; everything else is
    // seeded uniform init.
    static PEModelParams init(const EmbeddingStore& store, std::size_t hidden, std::uint64_t seed);

    std::size_t row_of(std::string_view token) const;
    std::span<const double> embedding_row(std::size_t row) const;
    std::span<double> embedding_row(std::size_t row);

    bool all_finite() const;
    std::string vocab_hash() const;
};

struct ForwardCache {
    std::vector<std::size_t> rows;  // embedding row per token position
    std::size_t n = 0;              // token count
    std::size_t d = 0, H = 0;       // copied from params for mismatch checks

    double dropout_rate = 0.0;
    std::uint64_t seed = 0;
    std::vector<std::uint8_t> keep;  // n x d keep flags; empty when rate == 0

    std::vector<double> used;    // n x d embeddings after dropout scaling
    std::vector<double> pooled;  // d
    std::vector<double> pre;     // H, pre-activation
    std::vector<double> hidden;  // H, post-ReLU
    double z = 0.0;              // raw logit
    double s = 0.5;              // sigmoid of clamped logit
};

// One forward pass. dropout_rate = 0 is fully deterministic; otherwise
// the mask comes from `seed` alone, so replaying a cache's seed
// reproduces z and s bit-identically. Throws on an empty token list.
ForwardCache forward(const PEModelParams& params, std::span<const std::string> tokens,
                     double dropout_rate = 0.0, std::uint64_t seed = 0);
ForwardCache forward(const PEModelParams& params, const Statement& statement,
                     double dropout_rate = 0.0, std::uint64_t seed = 0);

struct Gradients {
    std::vector<double> E, W1, b1, w2;
    double b2 = 0.0;

    static Gradients zeros_like(const PEModelParams& params);
    void reset();
};

// Per-position gradients with respect to the looked-up embedding rows,
// propagated through the dropout mask and the mean pool.
using TokenGradients = std::vector<std::vector<double>>;

// Reverse pass. Upstream signal may enter at the score (d_loss_d_s) and
// at the hidden representation (d_loss_d_h, empty = zeros). Parameter
// gradients are scaled by `weight` and added into `into`; token
// gradients (when requested) are unweighted.
void backward_accumulate(const PEModelParams& params, const ForwardCache& cache,
                         double d_loss_d_s, std::span<const double> d_loss_d_h, double weight,
                         Gradients& into, TokenGradients* token_grads = nullptr);

// Convenience form: exact gradients of a scalar loss with the given
// derivative with respect to s.
std::pair<Gradients, TokenGradients> backward(const PEModelParams& params,
                                              const ForwardCache& cache, double d_loss_d_s);

// s for a true label, 1-s for a false one.
double prob_of_label(const ForwardCache& cache, bool label);

struct CheckpointInfo {
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string vkb_hash;
};

// Single little-endian binary file (magic + version + dims + vocabulary
// + parameter arrays) plus a `<path>.manifest` text sidecar.
void save_checkpoint(const PEModelParams& params, const std::string& path,
                     const CheckpointInfo& info);
PEModelParams load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr);

}  // namespace ccsg
