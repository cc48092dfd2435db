#include "ccsg/embedding_store.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ccsg/common.hpp"

namespace ccsg {

namespace {

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

double parse_component(const std::string& field, std::size_t line_no) {
    double value = 0.0;
    const char* begin = field.data();
    const char* end = begin + field.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        throw std::runtime_error("embedding file line " + std::to_string(line_no) +
                                 ": non-numeric vector component '" + field + "'");
    }
    return value;
}

}  // namespace

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw std::invalid_argument("cosine: length mismatch (" + std::to_string(u.size()) +
                                    " vs " + std::to_string(v.size()) + ")");
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return dot / (std::sqrt(nu) * std::sqrt(nv));
}

void EmbeddingStore::insert(std::string token, const std::vector<double>& vec) {
    auto [it, fresh] = index_.try_emplace(std::move(token), tokens_.size());
    if (!fresh) {
        ++duplicates_;
        return;
    }
    tokens_.push_back(it->first);
    data_.insert(data_.end(), vec.begin(), vec.end());
}

EmbeddingStore EmbeddingStore::load(const std::string& path,
                                    std::optional<std::size_t> expected_dim) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open embedding file: " + path);

    EmbeddingStore store;
    if (expected_dim) store.dim_ = *expected_dim;

    std::string line;
    std::size_t line_no = 0;
    std::vector<double> vec;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string token;
        if (!(fields >> token)) continue;  // blank line

        vec.clear();
        std::string field;
        while (fields >> field) vec.push_back(parse_component(field, line_no));

        if (vec.empty()) {
            throw std::runtime_error("embedding file line " + std::to_string(line_no) +
                                     ": token without vector");
        }
        if (store.dim_ == 0) store.dim_ = vec.size();
        if (vec.size() != store.dim_) {
            throw std::runtime_error("embedding file line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(store.dim_) +
                                     " components, got " + std::to_string(vec.size()));
        }
        store.insert(lowercase(token), vec);
    }
    if (store.tokens_.empty()) throw std::runtime_error("embedding file is empty: " + path);
    return store;
}

EmbeddingStore EmbeddingStore::from_rows(
    const std::vector<std::pair<std::string, std::vector<double>>>& rows) {
    EmbeddingStore store;
    for (const auto& [token, vec] : rows) {
        if (token.empty()) throw std::runtime_error("embedding row with empty token");
        if (store.dim_ == 0) store.dim_ = vec.size();
        if (vec.empty() || vec.size() != store.dim_) {
            throw std::runtime_error("embedding row '" + token + "' has wrong dimensionality");
        }
        for (double x : vec) {
            if (!std::isfinite(x)) {
                throw std::runtime_error("embedding row '" + token + "' has non-finite component");
            }
        }
        store.insert(lowercase(token), vec);
    }
    if (store.tokens_.empty()) throw std::runtime_error("no embedding rows given");
    return store;
}

bool EmbeddingStore::contains(std::string_view token) const {
    return index_.count(lowercase(token)) != 0;
}

std::span<const double> EmbeddingStore::vector_of(std::string_view token) const {
    auto it = index_.find(lowercase(token));
    if (it == index_.end()) {
        throw std::out_of_range("token not in embedding store: " + std::string(token));
    }
    return {data_.data() + it->second * dim_, dim_};
}

std::vector<EmbeddingStore::Neighbor> EmbeddingStore::nearest(
    std::string_view token, std::size_t k, const std::set<std::string>& exclude) const {
    const std::string query = lowercase(token);
    if (!index_.count(query)) {
        throw std::out_of_range("nearest: unknown query token: " + query);
    }
    return nearest(std::span<const double>{data_.data() + index_.at(query) * dim_, dim_}, k,
                   exclude, query);
}

std::vector<EmbeddingStore::Neighbor> EmbeddingStore::nearest(
    std::span<const double> query, std::size_t k, const std::set<std::string>& exclude,
    std::string_view self_token) const {
    if (k == 0) throw std::invalid_argument("nearest: k must be positive");
    if (query.size() != dim_) throw std::invalid_argument("nearest: query dimension mismatch");

    std::set<std::string> skip;
    for (const auto& t : exclude) skip.insert(lowercase(t));
    if (!self_token.empty()) skip.insert(lowercase(self_token));

    std::vector<Neighbor> candidates;
    candidates.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (skip.count(tokens_[i])) continue;
        double sim = cosine(query, std::span<const double>{data_.data() + i * dim_, dim_});
        candidates.push_back({tokens_[i], sim});
    }

    auto better = [](const Neighbor& a, const Neighbor& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        return a.token < b.token;
    };
    if (candidates.size() > k) {
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<long>(k),
                          candidates.end(), better);
        candidates.resize(k);
    } else {
        std::sort(candidates.begin(), candidates.end(), better);
    }
    return candidates;
}

std::string EmbeddingStore::vocab_hash() const {
    std::uint64_t h = fnv1a64("vkb:" + std::to_string(dim_));
    for (const auto& t : tokens_) {
        h = splitmix64(h ^ fnv1a64(t));
    }
    return to_hex(h);
}

}  // namespace ccsg
