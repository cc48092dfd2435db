#include "ccsg/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "ccsg/common.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint layout assumes a little-endian host");

namespace ccsg {

namespace {

constexpr char kMagic[8] = {'C', 'C', 'S', 'G', 'M', 'O', 'D', 'L'};
constexpr std::uint8_t kVersion = 1;

double sigmoid_clamped(double z) {
    const double zc = std::clamp(z, -kLogitClamp, kLogitClamp);
    return 1.0 / (1.0 + std::exp(-zc));
}

void check_cache(const PEModelParams& params, const ForwardCache& cache) {
    if (cache.d != params.d || cache.H != params.H) {
        throw std::invalid_argument("backward: cache does not match these parameters");
    }
    for (std::size_t row : cache.rows) {
        if (row >= params.vocab.size()) {
            throw std::invalid_argument("backward: cache row outside vocabulary");
        }
    }
}

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint truncated");
}

void write_doubles(std::ofstream& out, const std::vector<double>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, std::vector<double>& v, std::size_t count) {
    v.resize(count);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated");
}

}  // namespace

PEModelParams PEModelParams::init(const EmbeddingStore& store, std::size_t hidden,
                                  std::uint64_t seed) {
    if (hidden == 0) throw std::invalid_argument("hidden width must be positive");
    PEModelParams p;
    p.d = store.dim();
    p.H = hidden;
    p.vocab = store.tokens();
    p.vocab.push_back("<unk>");
    p.unk_row = p.vocab.size() - 1;
    for (std::size_t i = 0; i < p.vocab.size(); ++i) p.row_index.emplace(p.vocab[i], i);

    p.E.assign(p.vocab.size() * p.d, 0.0);
    for (std::size_t i = 0; i + 1 < p.vocab.size(); ++i) {
        auto src = store.vector_of(p.vocab[i]);
        std::copy(src.begin(), src.end(), p.E.begin() + static_cast<long>(i * p.d));
    }
    // <unk> row stays zero; it is learned during training.

    Rng rng(mix_seed(seed, fnv1a64("pe-model-init")));
    const double r1 = std::sqrt(6.0 / static_cast<double>(p.d + p.H));
    p.W1.resize(p.d * p.H);
    for (double& w : p.W1) w = (rng.next_unit() * 2.0 - 1.0) * r1;
    p.b1.assign(p.H, 0.0);
    const double r2 = std::sqrt(6.0 / static_cast<double>(p.H + 1));
    p.w2.resize(p.H);
    for (double& w : p.w2) w = (rng.next_unit() * 2.0 - 1.0) * r2;
    p.b2 = 0.0;
    return p;
}

std::size_t PEModelParams::row_of(std::string_view token) const {
    auto it = row_index.find(std::string(token));
    return it == row_index.end() ? unk_row : it->second;
}

std::span<const double> PEModelParams::embedding_row(std::size_t row) const {
    return {E.data() + row * d, d};
}

std::span<double> PEModelParams::embedding_row(std::size_t row) {
    return {E.data() + row * d, d};
}

bool PEModelParams::all_finite() const {
    auto ok = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(E) && ok(W1) && ok(b1) && ok(w2) && std::isfinite(b2);
}

std::string PEModelParams::vocab_hash() const {
    std::uint64_t h = fnv1a64("model-vocab:" + std::to_string(d));
    for (const auto& t : vocab) h = splitmix64(h ^ fnv1a64(t));
    return to_hex(h);
}

ForwardCache forward(const PEModelParams& params, std::span<const std::string> tokens,
                     double dropout_rate, std::uint64_t seed) {
    if (tokens.empty()) throw std::invalid_argument("forward: empty token list");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0) {
        throw std::invalid_argument("forward: dropout rate must be in [0,1)");
    }

    ForwardCache cache;
    cache.d = params.d;
    cache.H = params.H;
    cache.n = tokens.size();
    cache.dropout_rate = dropout_rate;
    cache.seed = seed;

    cache.rows.reserve(cache.n);
    for (const auto& t : tokens) cache.rows.push_back(params.row_of(t));

    const std::size_t d = params.d;
    cache.used.resize(cache.n * d);
    if (dropout_rate > 0.0) {
        cache.keep.resize(cache.n * d);
        Rng rng(seed);
        const double scale = 1.0 / (1.0 - dropout_rate);
        for (std::size_t i = 0; i < cache.n; ++i) {
            auto row = params.embedding_row(cache.rows[i]);
            for (std::size_t k = 0; k < d; ++k) {
                const bool keep = rng.next_unit() >= dropout_rate;
                cache.keep[i * d + k] = keep ? 1 : 0;
                cache.used[i * d + k] = keep ? row[k] * scale : 0.0;
            }
        }
    } else {
        for (std::size_t i = 0; i < cache.n; ++i) {
            auto row = params.embedding_row(cache.rows[i]);
            std::copy(row.begin(), row.end(), cache.used.begin() + static_cast<long>(i * d));
        }
    }

    cache.pooled.assign(d, 0.0);
    for (std::size_t i = 0; i < cache.n; ++i) {
        for (std::size_t k = 0; k < d; ++k) cache.pooled[k] += cache.used[i * d + k];
    }
    const double inv_n = 1.0 / static_cast<double>(cache.n);
    for (double& x : cache.pooled) x *= inv_n;

    const std::size_t H = params.H;
    cache.pre.assign(H, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        const double pk = cache.pooled[k];
        const double* w_row = params.W1.data() + k * H;
        for (std::size_t j = 0; j < H; ++j) cache.pre[j] += pk * w_row[j];
    }
    cache.hidden.resize(H);
    for (std::size_t j = 0; j < H; ++j) {
        cache.pre[j] += params.b1[j];
        cache.hidden[j] = cache.pre[j] > 0.0 ? cache.pre[j] : 0.0;
    }

    cache.z = params.b2;
    for (std::size_t j = 0; j < H; ++j) cache.z += params.w2[j] * cache.hidden[j];
    cache.s = sigmoid_clamped(cache.z);
    return cache;
}

ForwardCache forward(const PEModelParams& params, const Statement& statement, double dropout_rate,
                     std::uint64_t seed) {
    return forward(params, std::span<const std::string>(statement.tokens), dropout_rate, seed);
}

Gradients Gradients::zeros_like(const PEModelParams& params) {
    Gradients g;
    g.E.assign(params.E.size(), 0.0);
    g.W1.assign(params.W1.size(), 0.0);
    g.b1.assign(params.b1.size(), 0.0);
    g.w2.assign(params.w2.size(), 0.0);
    g.b2 = 0.0;
    return g;
}

void Gradients::reset() {
    std::fill(E.begin(), E.end(), 0.0);
    std::fill(W1.begin(), W1.end(), 0.0);
    std::fill(b1.begin(), b1.end(), 0.0);
    std::fill(w2.begin(), w2.end(), 0.0);
    b2 = 0.0;
}

void backward_accumulate(const PEModelParams& params, const ForwardCache& cache,
                         double d_loss_d_s, std::span<const double> d_loss_d_h, double weight,
                         Gradients& into, TokenGradients* token_grads) {
    check_cache(params, cache);
    if (!d_loss_d_h.empty() && d_loss_d_h.size() != params.H) {
        throw std::invalid_argument("backward: hidden gradient has wrong width");
    }

    const std::size_t d = params.d;
    const std::size_t H = params.H;

    // sigmoid is flat outside the clamp window
    const double dz = (std::abs(cache.z) <= kLogitClamp)
                          ? d_loss_d_s * cache.s * (1.0 - cache.s)
                          : 0.0;

    std::vector<double> dpre(H);
    for (std::size_t j = 0; j < H; ++j) {
        const double dh = dz * params.w2[j] + (d_loss_d_h.empty() ? 0.0 : d_loss_d_h[j]);
        dpre[j] = cache.pre[j] > 0.0 ? dh : 0.0;
    }

    into.b2 += weight * dz;
    for (std::size_t j = 0; j < H; ++j) {
        into.w2[j] += weight * dz * cache.hidden[j];
        into.b1[j] += weight * dpre[j];
    }

    std::vector<double> dpooled(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) {
        const double* w_row = params.W1.data() + k * H;
        double* gw_row = into.W1.data() + k * H;
        const double pk = cache.pooled[k];
        double acc = 0.0;
        for (std::size_t j = 0; j < H; ++j) {
            gw_row[j] += weight * dpre[j] * pk;
            acc += w_row[j] * dpre[j];
        }
        dpooled[k] = acc;
    }

    const double inv_n = 1.0 / static_cast<double>(cache.n);
    const double drop_scale =
        cache.dropout_rate > 0.0 ? 1.0 / (1.0 - cache.dropout_rate) : 1.0;
    if (token_grads) {
        token_grads->clear();
        token_grads->reserve(cache.n);
    }
    std::vector<double> tok(d);
    for (std::size_t i = 0; i < cache.n; ++i) {
        double* gE_row = into.E.data() + cache.rows[i] * d;
        for (std::size_t k = 0; k < d; ++k) {
            double g = dpooled[k] * inv_n;
            if (!cache.keep.empty()) g = cache.keep[i * d + k] ? g * drop_scale : 0.0;
            tok[k] = g;
            gE_row[k] += weight * g;
        }
        if (token_grads) token_grads->push_back(tok);
    }
}

std::pair<Gradients, TokenGradients> backward(const PEModelParams& params,
                                              const ForwardCache& cache, double d_loss_d_s) {
    Gradients g = Gradients::zeros_like(params);
    TokenGradients tg;
    backward_accumulate(params, cache, d_loss_d_s, {}, 1.0, g, &tg);
    return {std::move(g), std::move(tg)};
}

double prob_of_label(const ForwardCache& cache, bool label) {
    return label ? cache.s : 1.0 - cache.s;
}

void save_checkpoint(const PEModelParams& params, const std::string& path,
                     const CheckpointInfo& info) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);

    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(params.d));
    write_pod(out, static_cast<std::uint32_t>(params.H));
    write_pod(out, static_cast<std::uint64_t>(params.vocab.size()));
    write_pod(out, static_cast<std::uint64_t>(params.unk_row));
    for (const auto& t : params.vocab) {
        write_pod(out, static_cast<std::uint32_t>(t.size()));
        out.write(t.data(), static_cast<std::streamsize>(t.size()));
    }
    write_doubles(out, params.E);
    write_doubles(out, params.W1);
    write_doubles(out, params.b1);
    write_doubles(out, params.w2);
    write_pod(out, params.b2);
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
    out.close();

    std::ofstream man(path + ".manifest");
    if (!man) throw std::runtime_error("cannot write manifest: " + path + ".manifest");
    man << "format_version = 1\n"
        << "d = " << params.d << "\n"
        << "H = " << params.H << "\n"
        << "vocab_size = " << params.vocab.size() << "\n"
        << "seed = " << info.seed << "\n"
        << "config_hash = " << info.config_hash << "\n"
        << "vkb_hash = " << info.vkb_hash << "\n";
}

PEModelParams load_checkpoint(const std::string& path, CheckpointInfo* info) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a model checkpoint: " + path);
    }
    std::uint8_t version = 0;
    read_pod(in, version);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }

    PEModelParams p;
    std::uint32_t d = 0, H = 0;
    std::uint64_t vocab_size = 0, unk_row = 0;
    read_pod(in, d);
    read_pod(in, H);
    read_pod(in, vocab_size);
    read_pod(in, unk_row);
    p.d = d;
    p.H = H;
    p.unk_row = unk_row;
    p.vocab.reserve(vocab_size);
    for (std::uint64_t i = 0; i < vocab_size; ++i) {
        std::uint32_t len = 0;
        read_pod(in, len);
        std::string token(len, '\0');
        in.read(token.data(), len);
        if (!in) throw std::runtime_error("checkpoint truncated");
        p.row_index.emplace(token, p.vocab.size());
        p.vocab.push_back(std::move(token));
    }
    read_doubles(in, p.E, vocab_size * p.d);
    read_doubles(in, p.W1, p.d * p.H);
    read_doubles(in, p.b1, p.H);
    read_doubles(in, p.w2, p.H);
    read_pod(in, p.b2);

    if (info) {
        *info = CheckpointInfo{};
        std::ifstream man(path + ".manifest");
        std::string line;
        while (man && std::getline(man, line)) {
            auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto trim = [](std::string v) {
                while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.erase(v.begin());
                while (!v.empty() && (v.back() == ' ' || v.back() == '\r')) v.pop_back();
                return v;
            };
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key == "seed") info->seed = std::stoull(value);
            if (key == "config_hash") info->config_hash = value;
            if (key == "vkb_hash") info->vkb_hash = value;
        }
    }
    return p;
}

}  // namespace ccsg
