// Shared helpers and independent oracles for the test binaries.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "mcp/architectures.hpp"
#include "mcp/data_model.hpp"
#include "mcp/synth.hpp"

namespace fixtures {

inline mcp::ForcingSeries forcing(std::size_t n, std::uint64_t seed = 1, double temp_mean = 2.0) {
    mcp::ForcingGenerator g;
    g.temp_mean = temp_mean;
    return mcp::generate_forcing(g, n, seed);
}

inline double rel_error(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

// Straight two-pass KGE over the given indices, population moments.
struct KgeOracle {
    double r, alpha, beta, kge;
};

inline KgeOracle kge_oracle(const std::vector<double>& sim, const std::vector<double>& obs,
                            const std::vector<std::size_t>& idx) {
    const double n = static_cast<double>(idx.size());
    double ms = 0, mo = 0;
    for (auto i : idx) {
        ms += sim[i];
        mo += obs[i];
    }
    ms /= n;
    mo /= n;
    double vs = 0, vo = 0, cov = 0;
    for (auto i : idx) {
        vs += (sim[i] - ms) * (sim[i] - ms);
        vo += (obs[i] - mo) * (obs[i] - mo);
        cov += (sim[i] - ms) * (obs[i] - mo);
    }
    const double ss = std::sqrt(vs / n), so = std::sqrt(vo / n);
    KgeOracle k{};
    k.r = cov / n / (ss * so);
    k.alpha = ss / so;
    k.beta = ms / mo;
    k.kge = 1.0 - std::sqrt((k.r - 1) * (k.r - 1) + (k.alpha - 1) * (k.alpha - 1) +
                            (k.beta - 1) * (k.beta - 1));
    return k;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace fixtures
