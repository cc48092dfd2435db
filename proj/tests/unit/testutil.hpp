// Shared helpers for the unit and acceptance suites: random model
// instances, finite-difference oracles, tempfile plumbing.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ccsg/embedding_store.hpp"
#include "ccsg/model.hpp"
#include "ccsg/text.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("ccsg_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
    return path.string();
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return content;
}

// vocabulary tokens t0..t{n-1} with uniform random vectors
inline ccsg::EmbeddingStore random_store(std::mt19937_64& rng, std::size_t n_tokens,
                                         std::size_t dim) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::pair<std::string, std::vector<double>>> rows;
    for (std::size_t i = 0; i < n_tokens; ++i) {
        std::vector<double> vec(dim);
        for (double& x : vec) x = u(rng);
        rows.emplace_back("t" + std::to_string(i), vec);
    }
    return ccsg::EmbeddingStore::from_rows(rows);
}

inline void randomize_params(ccsg::PEModelParams& params, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> u(-scale, scale);
    for (double& x : params.W1) x = u(rng);
    for (double& x : params.b1) x = u(rng);
    for (double& x : params.w2) x = u(rng);
    params.b2 = u(rng);
}

struct RelCheck {
    double max_rel = 0.0;
    bool ok = true;
};

inline void check_close(RelCheck& c, double analytic, double numeric, double rel_tol = 1e-4,
                        double abs_floor = 1e-7) {
    const double diff = std::abs(analytic - numeric);
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    const double rel = denom > 0.0 ? diff / denom : 0.0;
    if (diff > abs_floor && rel > rel_tol) c.ok = false;
    if (denom > 0.0 && diff > abs_floor) c.max_rel = std::max(c.max_rel, rel);
}

// central finite difference of a scalar function of one coordinate
template <typename F>
double central_diff(F&& f, double& coord, double step = 1e-5) {
    const double saved = coord;
    coord = saved + step;
    const double hi = f();
    coord = saved - step;
    const double lo = f();
    coord = saved;
    return (hi - lo) / (2.0 * step);
}

// Compares the full analytic gradient of forward(...).s against central
// differences, including per-token embedding gradients. Token lists
// must not repeat tokens (an embedding row perturbation moves every
// occurrence at once).
inline RelCheck gradient_check(ccsg::PEModelParams& params, const std::vector<std::string>& tokens,
                               double dropout_rate = 0.0, std::uint64_t seed = 0) {
    auto score = [&]() {
        return ccsg::forward(params, std::span<const std::string>(tokens), dropout_rate, seed).s;
    };
    const auto cache =
        ccsg::forward(params, std::span<const std::string>(tokens), dropout_rate, seed);
    auto [grads, token_grads] = ccsg::backward(params, cache, 1.0);

    RelCheck check;
    for (std::size_t i = 0; i < params.W1.size(); ++i) {
        check_close(check, grads.W1[i], central_diff(score, params.W1[i]));
    }
    for (std::size_t i = 0; i < params.b1.size(); ++i) {
        check_close(check, grads.b1[i], central_diff(score, params.b1[i]));
    }
    for (std::size_t i = 0; i < params.w2.size(); ++i) {
        check_close(check, grads.w2[i], central_diff(score, params.w2[i]));
    }
    check_close(check, grads.b2, central_diff(score, params.b2));
    for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
        const std::size_t row = params.row_of(tokens[pos]);
        for (std::size_t k = 0; k < params.d; ++k) {
            const double numeric = central_diff(score, params.E[row * params.d + k]);
            check_close(check, token_grads[pos][k], numeric);
            check_close(check, grads.E[row * params.d + k], numeric);
        }
    }
    return check;
}

}  // namespace testutil
